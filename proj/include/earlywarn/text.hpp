#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace earlywarn::text {

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Whole-string numeric parse; nullopt on any trailing junk.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Flat `key = value` file with `#` comments. Repeated keys keep every
/// value in file order.
class KeyValueFile {
public:
    static KeyValueFile parse(std::string_view contents, const std::string& origin);
    static KeyValueFile read(const std::string& path);

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
    std::optional<std::string> get(const std::string& key) const;
    std::vector<std::string> get_all(const std::string& key) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace earlywarn::text
