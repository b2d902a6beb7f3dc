#include "fedsim/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/error.hpp"

namespace fedsim::nn {

LossClosure tape_closure(std::function<Var(Tape&)> build) {
    return [build = std::move(build)](bool with_gradients) {
        Tape tape;
        Var l = build(tape);
        if (tape.stochastic()) throw DeterminismError("gradient check requires a deterministic model (disable dropout)");
        if (with_gradients) tape.backward(l);
        return l.value()[0];
    };
}

namespace {

double checked(double v) {
    if (!std::isfinite(v)) throw NumericError("gradient check: loss is not finite");
    return v;
}

}  // namespace

GradCheckResult grad_check(const LossClosure& closure, const std::vector<ParamSet*>& params, double step) {
    if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
    for (ParamSet* p : params) p->zero_grad();
    const double base = checked(closure(true));
    if (checked(closure(false)) != base) {
        throw DeterminismError("gradient check: repeated evaluation changed the loss");
    }

    GradCheckResult result;
    for (ParamSet* set : params) {
        for (auto& [name, p] : *set) {
            auto theta = p.value.data();
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double saved = theta[i];
                theta[i] = saved + step;
                const double up = checked(closure(false));
                theta[i] = saved - step;
                const double down = checked(closure(false));
                theta[i] = saved;
                const double numeric = (up - down) / (2.0 * step);
                const double err = std::abs(p.grad[i] - numeric) / std::max(1.0, std::abs(numeric));
                if (err > result.max_relative_error) {
                    result.max_relative_error = err;
                    result.worst_parameter = set->name() + "/" + name + "[" + std::to_string(i) + "]";
                }
            }
        }
    }
    return result;
}

}  // namespace fedsim::nn
