#pragma once

#include "infsup/bounds.hpp"
#include "infsup/constants.hpp"
#include "infsup/errors.hpp"
#include "infsup/fem.hpp"
#include "infsup/geometry.hpp"
#include "infsup/infsup_eig.hpp"
#include "infsup/mesh.hpp"
#include "infsup/quadrature.hpp"
#include "infsup/report.hpp"
