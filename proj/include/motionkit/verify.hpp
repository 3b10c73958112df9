#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace motionkit {

struct VerifyCheck {
    std::string name;
    bool passed = false;
    std::string detail;  // empty on success
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    bool all_passed() const;
};

// Deliberate corruption applied before the checks run, used to demonstrate
// that the suite actually detects broken invariants.
enum class VerifyFault { kNone = 0, kScheduleMonotonicity };

const std::vector<std::string>& verify_suite_names();  // epi, diffusion, ipi, metrics, all

// ArgumentError on an unknown suite name.
VerifyReport run_verify_suite(const std::string& suite, std::uint64_t seed,
                              VerifyFault fault = VerifyFault::kNone);

}  // namespace motionkit
