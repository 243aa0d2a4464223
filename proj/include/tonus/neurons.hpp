#pragma once

#include "tonus/tensor.hpp"

namespace tonus {

enum class NeuronKind : std::uint8_t { Cuba, Plif, None };

struct CubaParams {
    double alpha_u = 0.3;  // current decay, in [0,1]
    double alpha_v = 0.1;  // voltage decay, in [0,1]
    double theta = 1.0;    // membrane threshold, > 0
    void validate() const;
};

struct PlifParams {
    double tau = 2.0;      // membrane time constant, > 1 (learnable in training)
    double theta = 1.0;    // threshold, > v_reset
    double v_reset = 0.0;  // potential stored after a spike
    void validate() const;
};

// Scalar recurrences, shared by the tensor kernels below and by the trainer's
// unrolled backward pass.
//
// CUBA:  u' = (1-a_u) u + x
//        v_chg = (1-a_v) v + u'          (charged potential, compared to theta)
//        s = [v_chg >= theta]
//        v' = v_chg (1-s)                (reset to zero)
inline double cuba_current(double u, double x, const CubaParams& p) {
    return (1.0 - p.alpha_u) * u + x;
}
inline double cuba_charge(double v, double u_new, const CubaParams& p) {
    return (1.0 - p.alpha_v) * v + u_new;
}

// PLIF:  h = v + (x - (v - v_reset)) / tau
//        s = Heaviside(h - theta), Heaviside(0) = 1
//        v' = h (1-s) + v_reset s
inline double plif_charge(double v, double x, const PlifParams& p) {
    return v + (x - (v - p.v_reset)) / p.tau;
}

struct CubaState {
    Tensor u;  // synaptic current
    Tensor v;  // stored (post-reset) membrane potential
    explicit CubaState(const std::vector<std::size_t>& shape)
        : u(Tensor(shape)), v(Tensor(shape)) {}
    CubaState() = default;
    void reset();
};

struct PlifState {
    Tensor v;  // stored (post-reset) membrane potential
    double v_reset = 0.0;
    explicit PlifState(const std::vector<std::size_t>& shape, double reset_value)
        : v(Tensor(shape, reset_value)), v_reset(reset_value) {}
    PlifState() = default;
    void reset();
};

struct NeuronStepResult {
    Tensor spikes;     // strictly binary
    Tensor potential;  // charged membrane potential of this step, before reset
};

// One discrete time step over a whole layer. State is updated in place.
NeuronStepResult cuba_step(CubaState& state, const Tensor& x, const CubaParams& p);
NeuronStepResult plif_step(PlifState& state, const Tensor& x, const PlifParams& p);

}  // namespace tonus
