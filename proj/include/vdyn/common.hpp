#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace vdyn {

using Complex = std::complex<double>;
using VecC = Eigen::VectorXcd;
using MatC = Eigen::MatrixXcd;
using VecR = Eigen::VectorXd;
using MatR = Eigen::MatrixXd;

inline constexpr Complex kImag{0.0, 1.0};

struct VdynError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonConvergence : VdynError {
    int iterations;
    double residual;
    NonConvergence(int it, double res)
        : VdynError("network solve did not converge after " + std::to_string(it) +
                    " iterations (residual " + std::to_string(res) + ")"),
          iterations(it), residual(res) {}
};

struct SingularNetworkJacobian : VdynError {
    SingularNetworkJacobian() : VdynError("singular network Jacobian") {}
};

struct SingularMatrix : VdynError {
    using VdynError::VdynError;
};

struct SingularSchurComplement : VdynError {
    SingularSchurComplement() : VdynError("singular Schur complement A - B*conj(A)^-1*conj(B)") {}
};

struct StaleVoltageProfile : VdynError {
    double residual;
    explicit StaleVoltageProfile(double res)
        : VdynError("voltage profile does not solve the network equations (residual " +
                    std::to_string(res) + ")"),
          residual(res) {}
};

struct LowVoltageRegime : VdynError {
    explicit LowVoltageRegime(int bus)
        : VdynError("voltage magnitude at bus " + std::to_string(bus) +
                    " too small for device feedback evaluation") {}
};

struct PowerFlowDiverged : VdynError {
    using VdynError::VdynError;
};

struct EquilibriumResidualTooLarge : VdynError {
    using VdynError::VdynError;
};

struct ParseError : VdynError {
    int line;
    ParseError(int ln, const std::string& msg)
        : VdynError("parse error at line " + std::to_string(ln) + ": " + msg), line(ln) {}
};

struct ValidationError : VdynError {
    std::string field;
    ValidationError(const std::string& f, const std::string& reason)
        : VdynError("invalid case: field '" + f + "': " + reason), field(f) {}
};

}  // namespace vdyn
