#ifndef MLCD_TESTS_SUPPORT_HPP
#define MLCD_TESTS_SUPPORT_HPP

#include <filesystem>
#include <optional>
#include <string>

#include "mlcd/error.hpp"

namespace testing {

// Error code raised by f, or nullopt if it returned normally.
template <typename F>
std::optional<mlcd::ErrorCode> code_of(F&& f) {
    try {
        f();
    } catch (const mlcd::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

// Fresh scratch directory under the build tree, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) : path_(std::filesystem::temp_directory_path() / ("mlcd_test_" + name)) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

}  // namespace testing

#define CHECK_CODE(expr, expected) CHECK(testing::code_of([&] { (void)(expr); }) == (expected))

#endif  // MLCD_TESTS_SUPPORT_HPP
