#pragma once

#include <string>
#include <vector>

namespace fedlap {

struct VerifyOptions {
    double tol = 1e-12;  // matrix-form oracle tolerance (per coordinate)
    // Fault-injection hook for the mutation-sensitivity test: -1 flips the
    // sign of the regularization term fed to the matrix-form comparison.
    double regularize_sign = 1.0;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// The oracle suite behind `fedlap verify`: matrix-form equivalence,
/// quadratic closed-form convergence, the bounded-gradient constant,
/// gradient checks against finite differences, and dFedU == FedU at S = N.
std::vector<CheckResult> verify_all(const VerifyOptions& options = {});

/// True iff every check passed.
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace fedlap
