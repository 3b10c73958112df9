#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "motionkit/pose_types.hpp"

namespace motionkit {

struct PoolEntry {
    std::string id;  // "<basename>#<frame_index>"
    BodyPose body;
};

// Anchor-pose pool: candidate bodies harvested from pose sequence files.
// Entries are unique and sorted by id; every anchor satisfies the
// realignment precondition (visible neck plus at least one visible hip).
struct PosePool {
    std::vector<PoolEntry> entries;
    std::vector<std::string> source_manifest;

    std::size_t size() const { return entries.size(); }
};

// Harvests every frame_stride-th frame of each file, keeping only bodies
// with a visible torso. Throws IoError (unreadable file), PoolError
// (duplicate ids, i.e. duplicate basenames), EmptyPoolError (nothing
// survives the filter), ArgumentError (zero stride).
PosePool build_pool(const std::vector<std::string>& sequence_files, std::size_t frame_stride = 10);

// Entry at canonical (sorted-id) position. Throws IndexError out of range.
const PoolEntry& sample_anchor(const PosePool& pool, std::size_t index);

// {"version":1,"entries":[{"id":…,"body":[[x,y,c]×18]}…]}; byte-deterministic.
std::string serialize_pose_pool(const PosePool& pool);
PosePool parse_pose_pool(std::string_view text);

PosePool load_pose_pool(const std::string& path);
void save_pose_pool(const PosePool& pool, const std::string& path);

}  // namespace motionkit
