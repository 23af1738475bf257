#pragma once

#include <filesystem>
#include <iosfwd>

#include "ggt/tensor.hpp"

namespace ggt {

// GGT1 tensor files: magic "GGT1", u32 LE rank, rank x u32 LE extents, then
// product(extents) IEEE-754 float32 LE values in row-major order.

void write_ggt1(std::ostream& out, const TensorF& t);
TensorF read_ggt1(std::istream& in);

template <typename T>
void save_ggt1(const std::filesystem::path& path, const BasicTensor<T>& t);

template <typename T>
BasicTensor<T> load_ggt1(const std::filesystem::path& path);

// Size in bytes of the GGT1 record for a tensor of this shape.
std::size_t ggt1_record_size(const Shape& shape);

} // namespace ggt
