#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "homodyne/errors.hpp"

namespace homodyne {

enum class TraceUnits { watts, amps, volts };

inline const char* to_string(TraceUnits u) {
    switch (u) {
        case TraceUnits::watts: return "watts";
        case TraceUnits::amps: return "amps";
        case TraceUnits::volts: return "volts";
    }
    return "?";
}

inline TraceUnits trace_units_from_string(const std::string& s) {
    if (s == "watts") return TraceUnits::watts;
    if (s == "amps") return TraceUnits::amps;
    if (s == "volts") return TraceUnits::volts;
    throw ParseError("unknown trace units: " + s);
}

/// Uniformly sampled real-valued signal. The units tag is fixed at
/// construction; unit-changing operations return a new trace.
class TimeTrace {
public:
    TimeTrace(std::vector<double> samples, double dt, TraceUnits units,
              std::uint64_t seed)
        : samples_(std::move(samples)), dt_(dt), units_(units), seed_(seed) {
        if (!(dt_ > 0.0)) throw ConfigError("TimeTrace: dt must be positive");
        if (samples_.empty()) throw ConfigError("TimeTrace: empty sample array");
    }

    const std::vector<double>& samples() const { return samples_; }
    std::vector<double>& samples() { return samples_; }
    double dt() const { return dt_; }
    double sample_rate() const { return 1.0 / dt_; }
    TraceUnits units() const { return units_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t size() const { return samples_.size(); }
    double duration() const { return dt_ * static_cast<double>(samples_.size()); }

    double mean() const {
        double acc = 0.0;
        for (double v : samples_) acc += v;
        return acc / static_cast<double>(samples_.size());
    }

private:
    std::vector<double> samples_;
    double dt_;
    TraceUnits units_;
    std::uint64_t seed_;
};

}  // namespace homodyne
