#pragma once

#include <iosfwd>
#include <string>

#include "conformal_lab/disk_mesh.hpp"

namespace conformal_lab {

// Text formats (shortest round-trip decimals, so files reload bit-exactly):
//
//   diskmesh v1 <nv> <nt> <nb>     diskmap v1 <nv>
//   x y        (nv lines)          re im      (nv lines)
//   i j k      (nt lines, 0-based)
//   b          (nb lines, counterclockwise)

void write_mesh(std::ostream& out, const DiskMesh& mesh);
DiskMesh read_mesh(std::istream& in);

void write_map(std::ostream& out, const DiscreteMap& map);
DiscreteMap read_map(std::istream& in, const DiskMesh& mesh);

void save_mesh(const std::string& path, const DiskMesh& mesh);
DiskMesh load_mesh(const std::string& path);
void save_map(const std::string& path, const DiscreteMap& map);
DiscreteMap load_map(const std::string& path, const DiskMesh& mesh);

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

}  // namespace conformal_lab
