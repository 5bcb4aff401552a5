#include "spr/service/store.hpp"

#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>
#include <unistd.h>

#include "spr/core/document.hpp"
#include "spr/error.hpp"

namespace spr {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kPrefix = "sha256:";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write-then-rename so readers never see a partial object.
void write_atomically(const fs::path& path, const std::string& bytes) {
  static std::atomic<unsigned long> sequence{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(sequence++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << bytes;
    if (!out.flush()) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot move " + tmp.string() + ": " + ec.message());
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::Io, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

Store::Store(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "objects", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create store at " + root_.string() + ": " + ec.message());
}

bool Store::is_ref(std::string_view ref) {
  if (ref.substr(0, kPrefix.size()) != kPrefix || ref.size() != kPrefix.size() + 64) return false;
  for (char c : ref.substr(kPrefix.size()))
    if (!std::isxdigit(static_cast<unsigned char>(c)) || std::isupper(static_cast<unsigned char>(c))) return false;
  return true;
}

fs::path Store::object_path(const std::string& ref) const {
  if (!is_ref(ref)) throw Error(ErrorCode::InvalidInput, "malformed reference '" + ref + "'");
  return root_ / "objects" / (ref.substr(kPrefix.size()) + ".json");
}

std::string Store::put_text(const std::string& bytes) {
  std::string ref = std::string(kPrefix) + sha256_hex(bytes);
  fs::path path = object_path(ref);
  if (!fs::exists(path)) write_atomically(path, bytes);
  return ref;
}

std::string Store::put(const nlohmann::json& doc) { return put_text(canonical_dump(doc)); }

std::string Store::put_tree(const PropositionTree& tree) { return put_text(serialize_tree(tree)); }

std::string Store::get_text(const std::string& ref) const {
  fs::path path = object_path(ref);
  if (!fs::exists(path)) throw Error(ErrorCode::NotFound, "no document " + ref);
  std::string bytes = read_file(path);
  if (std::string(kPrefix) + sha256_hex(bytes) != ref)
    throw Error(ErrorCode::IntegrityError, "stored bytes for " + ref + " do not match their hash");
  return bytes;
}

nlohmann::json Store::get(const std::string& ref) const { return nlohmann::json::parse(get_text(ref)); }

PropositionTree Store::get_tree(const std::string& ref) const { return deserialize_tree(get_text(ref)); }

bool Store::contains(const std::string& ref) const { return is_ref(ref) && fs::exists(object_path(ref)); }

void Store::append_index(const nlohmann::json& record) {
  std::lock_guard lock(index_mu_);
  std::ofstream out(root_ / "index.jsonl", std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot append to the run index");
  out << record.dump() << '\n';
  out.flush();
}

std::vector<nlohmann::json> Store::read_index() const {
  std::lock_guard lock(index_mu_);
  std::vector<nlohmann::json> out;
  std::ifstream in(root_ / "index.jsonl", std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto doc = nlohmann::json::parse(line, nullptr, false);
    if (!doc.is_discarded()) out.push_back(std::move(doc));
  }
  return out;
}

}  // namespace spr
