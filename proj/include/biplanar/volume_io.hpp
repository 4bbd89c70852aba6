#pragma once

#include <filesystem>

#include <json.hpp>

#include "biplanar/volume.hpp"

namespace biplanar {

enum class ElementType { Int16, Float32 };

/// Dispatches on extension: `.json` builds a procedural phantom, `.mhd`/`.mha`
/// reads a MetaImage header with its raw little-endian data.
Volume load_volume(const std::filesystem::path& path);

/// MetaImage reader. Honors NDims (must be 3), DimSize, ElementSpacing, Offset,
/// ElementType (MET_SHORT, MET_FLOAT), ElementDataFile (path relative to the
/// header, or LOCAL) and BinaryDataByteOrderMSB. Throws ParseError or
/// DimensionMismatch.
Volume read_metaimage(const std::filesystem::path& header);

/// Writes `<stem>.mhd` next to `<stem>.raw`. Values are rounded when
/// written as Int16.
void write_metaimage(const Volume& vol, const std::filesystem::path& header, ElementType type = ElementType::Float32);

/// Procedural test volumes. Schema (all lengths mm):
///   {"phantom": "sphere" | "cylinder" | "spine",
///    "dims": [nx, ny, nz] | n, "spacing": [sx, sy, sz] | s,
///    "center": [x, y, z],        // volume centre; default puts the top face at z = 0
///    "radius": r, "value": v, "background": b,
///    "height": h,                // cylinder length along z
///    "count": n, "gap": g}       // spine: n spheres stacked along z, centre spacing g
/// A voxel takes `value` when its centre lies inside a shape.
Volume make_phantom(const nlohmann::json& spec);

}  // namespace biplanar
