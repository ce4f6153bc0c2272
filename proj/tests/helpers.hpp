#pragma once

#include "hydroscale/integrators.hpp"
#include "hydroscale/models.hpp"
#include "hydroscale/stats.hpp"
#include "hydroscale/verifier.hpp"

#include <vector>

namespace testing_support {

inline std::vector<double> to_vec(const hydroscale::State& x) { return {x.data(), x.data() + x.size()}; }

inline hydroscale::ModelSpec scalar_ou(double drift = 1.0, double noise = 1.0) {
    hydroscale::LinearOUParams p;
    p.drift = {drift};
    p.noise = {noise};
    return hydroscale::make_linear_ou(p);
}

// Shell state with energy on the three largest scales.
inline hydroscale::State shell_xi(const hydroscale::ModelSpec& m) {
    hydroscale::State x = hydroscale::State::Zero(m.dimension());
    x[0] = 1.0;
    x[2] = 0.7;
    x[4] = 0.5;
    return x;
}

inline bool same_path(const hydroscale::StatePath& a, const hydroscale::StatePath& b) {
    if (a.nodes() != b.nodes()) return false;
    for (std::size_t k = 0; k < a.nodes(); ++k)
        if (a[k] != b[k]) return false;
    return true;
}

inline double max_abs_diff(const hydroscale::StatePath& a, const hydroscale::StatePath& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.nodes(); ++k) m = std::max(m, (a[k] - b[k]).cwiseAbs().maxCoeff());
    return m;
}

}  // namespace testing_support
