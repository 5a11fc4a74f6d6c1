#include "selfpro/digest.hpp"

#include <array>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "selfpro/error.hpp"

namespace selfpro {
namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw Error(ErrorKind::numerical, "sha256 init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  void update(std::string_view s) { update(s.data(), s.size()); }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    std::string out;
    for (unsigned i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

void add_matrix(Sha256& h, const Matrix& m) {
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  h.update(shape, sizeof shape);
  h.update(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes);
  return h.hex();
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::load, fmt::format("cannot open {}", path.string()));
  Sha256 h;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
  return h.hex();
}

std::string params_digest(const EncoderParams& p) {
  Sha256 h;
  for (const Matrix* m : p.tensors()) add_matrix(h, *m);
  return h.hex();
}

std::string params_digest(const ProjectorParams& p) {
  Sha256 h;
  for (const Matrix* m : p.tensors()) add_matrix(h, *m);
  return h.hex();
}

std::string data_digest(const std::filesystem::path& dir) {
  Sha256 h;
  for (const char* name : {"edges.tsv", "features.csv", "labels.txt"}) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) continue;
    h.update(name);
    h.update(file_digest(path));
  }
  return h.hex();
}

}  // namespace selfpro
