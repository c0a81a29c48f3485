#pragma once

#include <stdexcept>
#include <string>

#include "sbdlab/kernels.hpp"

namespace sbdlab {

/// Parameters of the birth-death model: constant mortality, a dispersal
/// (birth) kernel and a competition (extra death) kernel.
///
/// `epsilon` only acts in rescaled mode, where the microscopic simulation runs
/// with competition scaled by epsilon and initial density divided by epsilon;
/// the kinetic equation itself always uses the unscaled kernels.
struct ModelParams {
    double mortality = 0.0;
    KernelSpec birth;        // a+ : dispersal intensity
    KernelSpec competition;  // a- : pairwise extra death intensity
    double epsilon = 1.0;
    bool rescaled = false;

    ModelParams() : birth(KernelSpec::zero(1)), competition(KernelSpec::zero(1)) {}
    ModelParams(double m, KernelSpec aplus, KernelSpec aminus, double eps = 1.0, bool resc = false)
        : mortality(m), birth(std::move(aplus)), competition(std::move(aminus)), epsilon(eps), rescaled(resc) {
        validate();
    }

    int dim() const { return birth.dim; }

    void validate() const {
        if (!(mortality >= 0.0))
            throw std::invalid_argument("ModelParams: mortality must be >= 0");
        birth.validate();
        competition.validate();
        if (birth.dim != competition.dim)
            throw std::invalid_argument("ModelParams: kernel dimensions differ");
        if (!(epsilon > 0.0) || epsilon > 1.0)
            throw std::invalid_argument("ModelParams: epsilon must lie in (0, 1]");
    }

    /// Competition strength actually applied between a pair of particles.
    double effective_competition_scale() const { return rescaled ? epsilon : 1.0; }
};

}  // namespace sbdlab
