#pragma once
// MD5 digests for row-ID file checksums and pipeline stage manifests.

#include <string>
#include <string_view>

namespace linguist {

std::string md5_hex(std::string_view data);

// Streams the file; throws std::runtime_error if it cannot be opened.
std::string md5_file_hex(const std::string& path);

}  // namespace linguist
