#include "tonus/events.hpp"

#include <string>

namespace tonus {

void BinningConfig::validate() const {
    if (num_bins < 1) throw ValidationError("binning: num_bins must be >= 1");
    if (window_us == 0 || window_us % num_bins != 0) {
        throw ValidationError("binning: window_us (" + std::to_string(window_us) +
                              ") must be divisible by num_bins (" + std::to_string(num_bins) + ")");
    }
    if (model_width < 1 || model_height < 1) {
        throw ValidationError("binning: model dimensions must be >= 1");
    }
    if (sensor_width < 1 || sensor_height < 1) {
        throw ValidationError("binning: sensor dimensions must be >= 1");
    }
}

Event rescale_event(const Event& e, const BinningConfig& cfg) {
    if (e.x >= cfg.sensor_width || e.y >= cfg.sensor_height) {
        throw ValidationError("rescale_event: event (" + std::to_string(e.x) + "," +
                              std::to_string(e.y) + ") outside sensor bounds " +
                              std::to_string(cfg.sensor_width) + "x" +
                              std::to_string(cfg.sensor_height));
    }
    Event out = e;
    out.x = static_cast<std::uint16_t>(static_cast<std::uint64_t>(e.x) * cfg.model_width /
                                       cfg.sensor_width);
    out.y = static_cast<std::uint16_t>(static_cast<std::uint64_t>(e.y) * cfg.model_height /
                                       cfg.sensor_height);
    return out;
}

SpikeTensor bin_events(std::span<const Event> events, std::uint64_t window_start_us,
                       const BinningConfig& cfg) {
    cfg.validate();
    SpikeTensor out;
    out.mode = cfg.mode;
    out.values = Tensor({cfg.num_bins, 2, cfg.model_height, cfg.model_width});

    const std::uint64_t window_end = window_start_us + cfg.window_us;
    std::uint64_t prev_t = window_start_us;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const Event& e = events[i];
        if (e.t_us < window_start_us || e.t_us >= window_end) {
            throw ValidationError("bin_events: event " + std::to_string(i) + " at t=" +
                                  std::to_string(e.t_us) + "us outside window [" +
                                  std::to_string(window_start_us) + "," +
                                  std::to_string(window_end) + ")");
        }
        if (e.t_us < prev_t) {
            throw ValidationError("bin_events: timestamps not ordered at index " +
                                  std::to_string(i));
        }
        prev_t = e.t_us;
        if (e.x >= cfg.model_width || e.y >= cfg.model_height) {
            throw ValidationError("bin_events: event " + std::to_string(i) +
                                  " not rescaled to model resolution");
        }
        const std::size_t bin =
            static_cast<std::size_t>((e.t_us - window_start_us) * cfg.num_bins / cfg.window_us);
        out.values.at4(bin, e.polarity ? 1 : 0, e.y, e.x) += 1.0;
    }

    if (cfg.mode == SpikeMode::Binary) {
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] = out.values[i] != 0.0 ? 1.0 : 0.0;
        }
    }
    return out;
}

SpikeTensor to_binary(const SpikeTensor& t) {
    SpikeTensor out;
    out.mode = SpikeMode::Binary;
    out.values = Tensor::zeros_like(t.values);
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        out.values[i] = t.values[i] != 0.0 ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace tonus
