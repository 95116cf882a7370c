#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dvq/autodiff.hpp"

namespace dvq::io {

// Named-tensor archive: "DVQT0001", u32 count, then per tensor
// u16 name length, name bytes, u32 rows, u32 cols, row-major f64 LE data.
using TensorMap = std::map<std::string, ad::Mat>;

void save_tensors(const TensorMap& tensors, const std::string& path);
TensorMap load_tensors(const std::string& path);

// Copies every parameter value (and Adam state under ".m"/".v") into a map.
TensorMap params_to_tensors(const ad::ParamStore& params, bool with_opt_state = false);
// Writes values back into existing parameters; throws on missing names.
void tensors_to_params(const TensorMap& tensors, ad::ParamStore& params,
                       bool with_opt_state = false);

// Low-level little-endian primitives shared by the template and dataset files.
void write_u32(std::ostream& os, uint32_t v);
void write_i32(std::ostream& os, int32_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);
uint32_t read_u32(std::istream& is);
int32_t read_i32(std::istream& is);
float read_f32(std::istream& is);
double read_f64(std::istream& is);

}  // namespace dvq::io
