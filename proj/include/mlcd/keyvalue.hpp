#ifndef MLCD_KEYVALUE_HPP
#define MLCD_KEYVALUE_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mlcd {

/// Ordered key=value pairs. Used for config files, checkpoint manifests,
/// run manifests and evaluation reports.
using KeyValues = std::map<std::string, std::string>;

/// One key per line, '#' starts a comment, surrounding whitespace trimmed.
/// Duplicate keys and lines without '=' raise Format errors.
KeyValues parse_key_values(const std::string& text, const std::string& source = "<memory>");
KeyValues read_key_values(const std::filesystem::path& path);

std::string format_key_values(const KeyValues& kv);
void write_key_values(const std::filesystem::path& path, const KeyValues& kv);

/// Typed lookups; a missing key raises InvalidArgument naming the key.
const std::string& require_key(const KeyValues& kv, const std::string& key);
double parse_double(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace mlcd

#endif  // MLCD_KEYVALUE_HPP
