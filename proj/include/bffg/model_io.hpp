#pragma once

#include <string>

#include "bffg/tree.hpp"

namespace bffg {

// JSON model format, version "bffg-model-v1". Strict: unknown keys anywhere
// in the document are rejected, as are missing required keys.
TreeModel parse_model_json(const std::string& text);
TreeModel parse_model_file(const std::string& path);
std::string model_to_json(const TreeModel& t);

// JSON result format. All reals are written with 17 significant digits so the
// file round-trips losslessly; non-finite reals are written as the strings
// "inf", "-inf", "nan". Key order and layout are fixed, so identical results
// serialize to identical bytes.
std::string result_to_json(const SmoothingResult& r, double wall_clock_ms);
void write_result_file(const std::string& path, const SmoothingResult& r, double wall_clock_ms);

struct ParsedResult {
    SmoothingResult result;
    double wall_clock_ms = 0.0;
    std::string stream_algorithm;
};

ParsedResult parse_result_json(const std::string& text);
ParsedResult parse_result_file(const std::string& path);

} // namespace bffg
