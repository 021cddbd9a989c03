/*
 * Copyright 2026 The shapstab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace shapstab {

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Throws IoError on failure.
void write_file(const std::filesystem::path& path, std::string_view contents);

namespace detail {

std::vector<std::string> split_csv_line(std::string_view line);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace detail

}  // namespace shapstab
