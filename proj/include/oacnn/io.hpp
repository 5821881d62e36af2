#pragma once
#include <string>

#include "oacnn/geometry.hpp"

// Point-cloud file IO. Two input formats:
//  - PLY (ascii 1.0 or binary_little_endian 1.0) with properties
//    x,y,z (float), red,green,blue (uchar) and an optional label (ushort);
//  - plain text, one `x y z r g b [label]` line per point with r,g,b in [0,1].
// Colors map to features by v/255 on read and round(v*255) on write, so a
// write -> read -> write cycle is byte-identical.

namespace oacnn {

PointCloud read_ply(const std::string &path);
void write_ply(const std::string &path, const PointCloud &pc, bool binary = true,
               bool with_labels = false);

PointCloud read_point_text(const std::string &path);

// Dispatch by extension: .ply or anything else as text.
PointCloud read_point_file(const std::string &path);

} // namespace oacnn
