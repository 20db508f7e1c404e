#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace bookforge {

std::string sha256_hex(std::string_view bytes);

/// Content-addressed blobs: a ref is "<sha256>.<ext>", so equal bytes share
/// a ref. Writes go through a temp file and rename.
class BlobStore {
public:
    explicit BlobStore(std::filesystem::path root);

    std::string put(std::string_view bytes, std::string_view extension);
    std::string get(const std::string& ref) const;
    bool contains(const std::string& ref) const;
    std::filesystem::path path_of(const std::string& ref) const;
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
};

/// Append-only JSON-lines log. Each append is flushed and fsync'd before it
/// returns; replay skips a torn final line.
class Journal {
public:
    explicit Journal(std::filesystem::path file);
    ~Journal();

    Journal(const Journal&) = delete;
    Journal& operator=(const Journal&) = delete;

    void append(const nlohmann::json& entry);
    std::vector<nlohmann::json> replay() const;

private:
    std::filesystem::path file_;
    int fd_ = -1;
    std::mutex mutex_;
};

std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace bookforge
