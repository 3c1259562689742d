#include <charconv>
#include <cstdio>
#include <sstream>

#include "p2pbuf/cli.hpp"
#include "p2pbuf/error.hpp"

namespace p2pbuf::cli {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string digest_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

double parse_double(std::string_view s) {
  std::string copy(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(copy, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("not a number: '" + copy + "'");
  }
  if (used != copy.size()) throw InvalidArgument("not a number: '" + copy + "'");
  return v;
}

}  // namespace

std::vector<double> parse_targets(std::string_view spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string_view::npos) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= spec.size(); ++i) {
      if (i == spec.size() || spec[i] == ':') {
        parts.push_back(spec.substr(start, i - start));
        start = i + 1;
      }
    }
    if (parts.size() != 3) throw InvalidArgument("range must be lo:hi:n");
    const double lo = parse_double(parts[0]);
    const double hi = parse_double(parts[1]);
    int n = 0;
    auto [ptr, ec] = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), n);
    if (ec != std::errc{} || ptr != parts[2].data() + parts[2].size() || n < 1) {
      throw InvalidArgument("range count must be a positive integer");
    }
    if (n == 1) return {lo};
    for (int k = 0; k < n; ++k) out.push_back(lo + (hi - lo) * k / (n - 1));
    return out;
  }
  std::size_t start = 0;
  for (std::size_t i = 0; i <= spec.size(); ++i) {
    if (i == spec.size() || spec[i] == ',') {
      if (i > start) out.push_back(parse_double(spec.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (out.empty()) throw InvalidArgument("no targets given");
  return out;
}

}  // namespace p2pbuf::cli
