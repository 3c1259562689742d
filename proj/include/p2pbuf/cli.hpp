#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace p2pbuf::cli {

// Runs one command line (without the program name). CSV goes to `out` unless
// --out names a file; diagnostics and, for stdout runs, the manifest go to
// `err`. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Probabilities and real-valued results: six significant digits.
std::string format_real(double v);

// FNV-1a 64-bit digest, rendered as 16 hex digits.
std::string digest_hex(std::string_view text);

// Parses "0.8,0.9,0.99" or a range "lo:hi:n" (n points, inclusive ends).
std::vector<double> parse_targets(std::string_view spec);

}  // namespace p2pbuf::cli
