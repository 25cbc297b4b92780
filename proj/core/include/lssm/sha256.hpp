#pragma once

#include <cstdint>
#include <string>
#include <string_view>

// Minimal SHA-256 (FIPS 180-4), used to fingerprint configuration files in
// run manifests.  Not intended for any security-sensitive purpose.

namespace lssm {

std::string sha256_hex(std::string_view data);

} // namespace lssm
