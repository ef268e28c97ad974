// Central finite differences over a flat parameter view.
//
// This is the independent gradient oracle: it only re-evaluates the loss
// closure, never touching any backward pass. The loss closure must be
// deterministic (fix masks and RNG state before calling).
#pragma once

#include <functional>
#include <vector>

#include "mmbal/common.hpp"

namespace mmbal {

inline std::vector<double> finite_difference_grad(const std::function<double()>& loss_fn,
                                                  const std::vector<double*>& params,
                                                  double epsilon = 1e-5) {
    check_config(epsilon > 0.0, "finite_difference_grad: epsilon must be positive");
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i];
        const double original = *p;
        *p = original + epsilon;
        const double plus = loss_fn();
        *p = original - epsilon;
        const double minus = loss_fn();
        *p = original;
        grad[i] = (plus - minus) / (2.0 * epsilon);
    }
    return grad;
}

}  // namespace mmbal
