#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "eta/errors.hpp"
#include "eta/matrix.hpp"

namespace eta {

// Central-finite-difference validation of analytic gradients. `params` and
// `grads` are parallel lists of shape-congruent tensors; `f` re-evaluates the
// scalar objective from the current parameter values. Returns the max over
// all entries of |analytic - central_difference| / max(1, |central_difference|).
inline double backward_check(const std::vector<Matrix*>& params,
                             const std::vector<const Matrix*>& grads,
                             const std::function<double()>& f, double eps = 1e-4) {
    if (params.size() != grads.size())
        throw ParamError("backward_check: params/grads list length mismatch");
    double max_err = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        Matrix& w = *params[t];
        const Matrix& g = *grads[t];
        if (!w.same_shape(g))
            throw ShapeError("backward_check: tensor " + std::to_string(t) +
                             " shape mismatch " + shape_str(w) + " vs " + shape_str(g));
        for (std::size_t i = 0; i < w.size(); ++i) {
            double orig = w.data[i];
            w.data[i] = orig + eps;
            double fp = f();
            w.data[i] = orig - eps;
            double fm = f();
            w.data[i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("backward_check: objective non-finite under perturbation");
            double fd = (fp - fm) / (2.0 * eps);
            double err = std::abs(g.data[i] - fd) / std::max(1.0, std::abs(fd));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace eta
