#pragma once

#include <string>
#include <vector>

#include "cbm/degradation.hpp"
#include "cbm/errors.hpp"
#include "cbm/rng.hpp"

namespace cbm {

// One component's recorded life as per-period signals; the cumulative damage
// crosses the failure threshold exactly at the last period.
struct PeriodizedSeries {
    std::string component_id;
    std::vector<PeriodSignal> periods;

    long total_shocks() const {
        long k = 0;
        for (const auto& p : periods) k += p.k;
        return k;
    }
    long total_damage() const {
        long z = 0;
        for (const auto& p : periods) z += p.z;
        return z;
    }
};

// Trajectory source for replay evaluation: draws uniformly with replacement.
class ReplayPool {
public:
    explicit ReplayPool(std::vector<PeriodizedSeries> pool) : pool_(std::move(pool)) {
        if (pool_.empty()) throw ConfigError("replay pool must be nonempty");
        for (const auto& s : pool_)
            if (s.periods.empty())
                throw ConfigError("replay pool contains an empty trajectory: " + s.component_id);
    }

    const PeriodizedSeries& draw(Rng& rng) const {
        return pool_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(pool_.size()) - 1))];
    }

    std::size_t size() const { return pool_.size(); }
    const std::vector<PeriodizedSeries>& series() const { return pool_; }

private:
    std::vector<PeriodizedSeries> pool_;
};

}  // namespace cbm
