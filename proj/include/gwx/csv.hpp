#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gwx::csv {

//! Locale-independent rendering with 17 significant digits ("%.17g").
std::string format(double x);

//! Join already-formatted cells with commas and end the line.
std::string row(const std::vector<std::string>& cells);

//! Write `contents` to `path`, creating parent directories.
void write_file(const std::string& path, std::string_view contents);

}  // namespace gwx::csv
