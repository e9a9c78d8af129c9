#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

namespace tailrisk {

// Shortest decimal form that round-trips the exact double.  All persisted
// numbers go through this so reruns are byte-identical.
std::string format_double(double value);

std::string sha256_hex(std::string_view bytes);

// Write-temp-then-rename so readers never observe a partial file.  Throws on
// any IO failure, naming the path.
void atomic_write(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);

// Runs body(i) for i in [0, count).  Honors TAILRISK_THREADS as a cap; each
// index writes only its own slot upstream, so the schedule cannot leak into
// results.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace tailrisk
