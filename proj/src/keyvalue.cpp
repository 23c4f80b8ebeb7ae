#include "mlcd/keyvalue.hpp"

#include <charconv>
#include <cstdint>
#include <fmt/format.h>
#include <sstream>

#include "mlcd/error.hpp"
#include "mlcd/fmat.hpp"

namespace mlcd {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& source) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::Format, source + ":" + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw Error(ErrorCode::Format, source + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second) {
            throw Error(ErrorCode::Format, source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
    return parse_key_values(read_file_bytes(path), path.string());
}

std::string format_key_values(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

void write_key_values(const std::filesystem::path& path, const KeyValues& kv) {
    write_file_bytes(path, format_key_values(kv));
}

const std::string& require_key(const KeyValues& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::InvalidArgument, "missing config key '" + key + "'");
    return it->second;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used == value.size()) return v;
    } catch (...) {
    }
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' is not a number: '" + value + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' is not a non-negative integer: '" + value + "'");
    }
    return v;
}

std::string format_double(double v) { return fmt::format("{}", v); }

}  // namespace mlcd
