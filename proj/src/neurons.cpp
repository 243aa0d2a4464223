#include "tonus/neurons.hpp"

namespace tonus {

void CubaParams::validate() const {
    if (alpha_u < 0.0 || alpha_u > 1.0 || alpha_v < 0.0 || alpha_v > 1.0) {
        throw ValidationError("cuba: decays must lie in [0,1]");
    }
    if (theta <= 0.0) throw ValidationError("cuba: theta must be > 0");
}

void PlifParams::validate() const {
    if (tau <= 1.0) throw ValidationError("plif: tau must be > 1");
    if (theta <= v_reset) throw ValidationError("plif: theta must exceed v_reset");
}

void CubaState::reset() {
    u.fill(0.0);
    v.fill(0.0);
}

void PlifState::reset() { v.fill(v_reset); }

NeuronStepResult cuba_step(CubaState& state, const Tensor& x, const CubaParams& p) {
    p.validate();
    state.u.require_shape(x, "cuba_step input");
    NeuronStepResult r{Tensor::zeros_like(x), Tensor::zeros_like(x)};
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double u_new = cuba_current(state.u[i], x[i], p);
        const double v_chg = cuba_charge(state.v[i], u_new, p);
        const double s = v_chg >= p.theta ? 1.0 : 0.0;
        state.u[i] = u_new;
        state.v[i] = v_chg * (1.0 - s);
        r.spikes[i] = s;
        r.potential[i] = v_chg;
    }
    return r;
}

NeuronStepResult plif_step(PlifState& state, const Tensor& x, const PlifParams& p) {
    p.validate();
    state.v.require_shape(x, "plif_step input");
    NeuronStepResult r{Tensor::zeros_like(x), Tensor::zeros_like(x)};
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double h = plif_charge(state.v[i], x[i], p);
        const double s = h >= p.theta ? 1.0 : 0.0;  // Heaviside(0) = 1
        state.v[i] = h * (1.0 - s) + p.v_reset * s;
        r.spikes[i] = s;
        r.potential[i] = h;
    }
    return r;
}

}  // namespace tonus
