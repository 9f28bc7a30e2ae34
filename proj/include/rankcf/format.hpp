#ifndef RANKCF_FORMAT_HPP
#define RANKCF_FORMAT_HPP

#include <string>
#include <string_view>

namespace rankcf {

// Shortest decimal string that parses back to exactly `value`. Non-finite
// values print as "nan", "inf", "-inf".
std::string format_double(double value);

// Strict full-string parse; returns false on trailing garbage or empty input.
bool parse_double(std::string_view text, double& out);

}  // namespace rankcf

#endif  // RANKCF_FORMAT_HPP
