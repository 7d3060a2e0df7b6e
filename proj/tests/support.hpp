#pragma once

#include "eitbin/config.hpp"
#include "eitbin/fem.hpp"
#include "eitbin/geometry.hpp"
#include "eitbin/opt.hpp"

#include <map>
#include <memory>

namespace eitbin::test {

/// Mesh, 16 electrodes and the default scheme, built once per element count.
struct Rig {
    Mesh mesh;
    ElectrodeLayout layout;
    ExcitationScheme scheme;
};

inline const Rig& rig(int elements) {
    static std::map<int, std::unique_ptr<Rig>> cache;
    auto& slot = cache[elements];
    if (!slot) {
        slot = std::make_unique<Rig>();
        slot->mesh = build_disc_mesh(0.1, elements);
        slot->layout = place_electrodes(slot->mesh, 16, 0.12, 0.1);
        slot->scheme = ExcitationScheme(default_voltage_pattern());
    }
    return *slot;
}

/// Target data simulated from `sigma` plus the problem pointing at it.
struct Fixture {
    const Rig* r;
    MeasurementSet target;
    EitProblem problem() const { return {&r->mesh, &r->layout, &r->scheme, &target, nullptr}; }
};

inline Fixture fixture(const Rig& r, const ConductivityField& sigma) {
    return {&r, simulate_measurements(r.mesh, r.layout, sigma, r.scheme)};
}

}  // namespace eitbin::test
