#pragma once

#include <string>
#include <string_view>

#include "motionkit/pose_types.hpp"

namespace motionkit {

// Parses the version-1 pose JSON document. Throws ParseError (with line and
// byte offset) on malformed JSON and SchemaError (naming the field) on
// schema violations.
PoseSequence parse_pose_sequence(std::string_view text);

// Emits the version-1 pose JSON document: fixed key order, compact
// separators, 9 fractional digits for every real number. Byte-deterministic
// for identical input.
std::string serialize_pose_sequence(const PoseSequence& seq);

// Type-invariant checks shared by the parser and by code that builds
// sequences programmatically. Throws SchemaError.
void validate_pose_sequence(const PoseSequence& seq);

// Fixed-format real number used by every JSON emitter in this library.
std::string format_real(double value);

}  // namespace motionkit
