#pragma once

#include <cmath>
#include <stdexcept>

namespace ppde {

// Uniform time grid t_k = k*T/N on [0, T].
class TimeGrid {
public:
    TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
        if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be > 0");
        if (steps < 1) throw std::invalid_argument("TimeGrid: steps must be >= 1");
    }

    double horizon() const { return horizon_; }
    int steps() const { return steps_; }
    double dt() const { return horizon_ / steps_; }
    double time(int k) const { return horizon_ * static_cast<double>(k) / steps_; }

    bool operator==(const TimeGrid& o) const {
        return horizon_ == o.horizon_ && steps_ == o.steps_;
    }
    bool operator!=(const TimeGrid& o) const { return !(*this == o); }

    // Grid of the time window [t_k, T], re-anchored at 0. Spacing is preserved.
    TimeGrid suffix(int k) const {
        if (k < 0 || k >= steps_) throw std::out_of_range("TimeGrid::suffix: bad index");
        return TimeGrid(horizon_ - time(k), steps_ - k);
    }

private:
    double horizon_;
    int steps_;
};

}  // namespace ppde
