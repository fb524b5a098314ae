#pragma once

// Level bookkeeping shared by the nested Monte Carlo kernel and its serial
// reference.

#include "rsb/wiener_rsb.hpp"

#include <random>
#include <vector>

namespace rsb::detail {

// A piece of a measure plateau lying inside one native increment of the
// functional's grid.
struct Piece {
  double start = 0.0;
  double end = 0.0;
  double x = 0.0;
  double dx = 0.0;
  std::size_t native = 0;  // index t >= 1 of the native increment
  double scale = 1.0;      // sqrt(width / native width)
};

struct Group {
  std::vector<std::size_t> pieces;
  double x = 0.0;
  double dx = 0.0;
};

struct NestedLayout {
  std::size_t copies = 0;
  std::size_t natives = 0;  // T + 1
  NoiseKind kind = NoiseKind::normal;
  bool direct = true;  // every native increment is a single piece
  std::vector<Piece> pieces;
  std::vector<Group> groups;
};

NestedLayout make_layout(const WienerFunctional& psi, const DiscreteParisiMeasure& mu,
                         const std::vector<double>& dx);

// Fills table[(c * group_pieces + p) * N + j] with N uniforms per
// (copy, piece), Latin-hypercube stratified when requested.
void draw_group_uniforms(std::mt19937_64& gen, std::size_t copies, std::size_t group_pieces, std::size_t N,
                         bool stratified, std::vector<double>& table);

inline double to_kind(double u, NoiseKind kind) { return kind == NoiseKind::uniform ? u : normal_quantile(u); }

// Native noise for the functional from the per-piece normals (non-direct layouts).
void aggregate_native(const NestedLayout& layout, const std::vector<double>& piece_z, std::vector<double>& native);

}  // namespace rsb::detail
