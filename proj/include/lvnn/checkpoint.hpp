#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "lvnn/curves.hpp"
#include "lvnn/network.hpp"

namespace lvnn {

inline constexpr int kCheckpointVersion = 1;

// Trained network plus the chart it was trained in.
struct Checkpoint {
    NetParams params;
    std::optional<ScalingBox> box;
};

// JSON document: {"format": "lvnn-checkpoint", "version": 1, "mode": ...,
// "widths": [h1, h2], "w1": [...row-major...], "b1", "w2", "b2", "w3", "b3",
// "scaling": {...} (optional)}.
nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lvnn
