#include "trialmatch/llm/backend.hpp"

#include <cstdio>
#include <memory>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "util/strings.hpp"

namespace trialmatch::llm {

namespace {

constexpr std::string_view kHeaderTag = "@request";

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string encode_value(std::string_view v) {
  std::string out;
  for (char c : v) {
    if (c == '%' || c == '=' || util::is_space(c)) {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", static_cast<unsigned char>(c));
      out += buf;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string decode_value(std::string_view v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == '%' && i + 2 < v.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(v.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(v[i]);
    }
  }
  return out;
}

}  // namespace

std::string request_key(const ChatRequest& request) {
  nlohmann::json canonical = nlohmann::json::array(
      {request.model, request.system_text, request.user_text, request.temperature});
  return sha256_hex(canonical.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

std::string format_request_header(const RequestHeader& fields) {
  std::string out(kHeaderTag);
  for (const auto& [k, v] : fields) {
    out += ' ';
    out += k;
    out += '=';
    out += encode_value(v);
  }
  return out;
}

std::optional<RequestHeader> parse_request_header(std::string_view user_text) {
  auto first = user_text.substr(0, user_text.find('\n'));
  if (!first.starts_with(kHeaderTag)) return std::nullopt;
  RequestHeader fields;
  for (const auto& item : util::split_whitespace(first.substr(kHeaderTag.size()))) {
    auto eq = item.find('=');
    if (eq == std::string::npos) continue;
    try {
      fields[item.substr(0, eq)] = decode_value(std::string_view(item).substr(eq + 1));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return fields;
}

}  // namespace trialmatch::llm
