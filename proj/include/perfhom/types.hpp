// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace perfhom {

using Real = double;
using Complex = std::complex<double>;

using Vec = Eigen::VectorXcd;
using RealVec = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Compressed-row storage, matching the documented on-disk/coordinate layout.
using SpMat = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using SpMatCol = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;
using Index = Eigen::Index;

enum class Symmetry { Hermitian, ComplexSymmetric, None };

struct Error : std::runtime_error {
  enum class Code {
    Argument,
    Geometry,
    Mesh,
    Resource,
    Assembly,
    Solver,
    Validation,
    Numerical,
  };
  Code code;
  Error(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

[[noreturn]] inline void throw_error(Error::Code c, const std::string& msg) {
  throw Error(c, msg);
}

inline const char* error_code_name(Error::Code c) {
  switch (c) {
    case Error::Code::Argument: return "argument";
    case Error::Code::Geometry: return "geometry";
    case Error::Code::Mesh: return "mesh";
    case Error::Code::Resource: return "resource";
    case Error::Code::Assembly: return "assembly";
    case Error::Code::Solver: return "solver";
    case Error::Code::Validation: return "validation";
    case Error::Code::Numerical: return "numerical";
  }
  return "unknown";
}

}  // namespace perfhom
