#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tonus/tensor.hpp"

namespace tonus {

// One camera event: a per-pixel brightness change with microsecond timestamp.
struct Event {
    std::uint64_t t_us = 0;
    std::uint16_t x = 0;  // column, sensor coordinates
    std::uint16_t y = 0;  // row, sensor coordinates
    std::uint8_t polarity = 0;  // 0 = OFF (darker), 1 = ON (brighter)
};

enum class SpikeMode : std::uint8_t { Graded, Binary };

struct BinningConfig {
    std::uint64_t window_us = 10000;  // one inference window
    std::uint32_t num_bins = 8;      // equal-duration bins per window
    SpikeMode mode = SpikeMode::Graded;
    std::uint16_t model_width = 160;
    std::uint16_t model_height = 160;
    std::uint16_t sensor_width = 160;
    std::uint16_t sensor_height = 160;

    // window_us divisible by num_bins, num_bins >= 1, dims >= 1.
    void validate() const;
    std::uint64_t bin_duration_us() const { return window_us / num_bins; }
};

// Binned event window: (T bins, 2 polarities, H, W). Graded cells hold event
// counts, binary cells hold occurrence indicators.
struct SpikeTensor {
    Tensor values;  // shape (T, 2, H, W)
    SpikeMode mode = SpikeMode::Graded;

    std::size_t num_bins() const { return values.dim(0); }
    std::size_t height() const { return values.dim(2); }
    std::size_t width() const { return values.dim(3); }
};

// Maps sensor coordinates onto the model grid with a per-axis floor scale.
// Timestamp and polarity pass through unchanged.
Event rescale_event(const Event& e, const BinningConfig& cfg);

// Builds the spike tensor for one window. Events must be rescaled already,
// sorted by timestamp, and lie within [window_start_us, window_start_us + window_us).
SpikeTensor bin_events(std::span<const Event> events, std::uint64_t window_start_us,
                       const BinningConfig& cfg);

// Elementwise indicator. Idempotent on binary input.
SpikeTensor to_binary(const SpikeTensor& t);

}  // namespace tonus
