#include "bookforge/store.hpp"

#include "bookforge/error.hpp"

#include <openssl/evp.h>

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <fstream>
#include <sstream>

namespace bookforge {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Io, "sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xf];
    }
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

BlobStore::BlobStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

std::string BlobStore::put(std::string_view bytes, std::string_view extension) {
    std::string ref = sha256_hex(bytes);
    ref += '.';
    ref += extension;
    const fs::path target = path_of(ref);
    if (!fs::exists(target)) write_file_atomic(target, bytes);
    return ref;
}

std::string BlobStore::get(const std::string& ref) const {
    if (!contains(ref)) throw Error(ErrorCode::NotFound, "blob " + ref + " is missing");
    return read_file(path_of(ref));
}

bool BlobStore::contains(const std::string& ref) const { return !ref.empty() && fs::exists(path_of(ref)); }

fs::path BlobStore::path_of(const std::string& ref) const {
    if (ref.find('/') != std::string::npos || ref.find("..") != std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "bad blob ref '" + ref + "'");
    }
    return root_ / ref.substr(0, 2) / ref;
}

Journal::Journal(fs::path file) : file_(std::move(file)) {
    if (file_.has_parent_path()) fs::create_directories(file_.parent_path());
    fd_ = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::Io, "cannot open journal " + file_.string());
}

Journal::~Journal() {
    if (fd_ >= 0) ::close(fd_);
}

void Journal::append(const nlohmann::json& entry) {
    std::string line = entry.dump();
    line += '\n';
    std::lock_guard lock(mutex_);
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = ::write(fd_, line.data() + written, line.size() - written);
        if (n < 0) throw Error(ErrorCode::Io, "journal write failed");
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw Error(ErrorCode::Io, "journal fsync failed");
}

std::vector<nlohmann::json> Journal::replay() const {
    std::vector<nlohmann::json> entries;
    std::ifstream in(file_, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto parsed = nlohmann::json::parse(line, nullptr, false);
        if (parsed.is_discarded()) {
            // only the last line may be torn
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw Error(ErrorCode::Io, "corrupt journal entry in " + file_.string());
        }
        entries.push_back(std::move(parsed));
    }
    return entries;
}

}  // namespace bookforge
