#pragma once

#include <string>

namespace phenoct {

std::string sha256_hex(const std::string& data);
std::string sha256_hex_file(const std::string& path);

}  // namespace phenoct
