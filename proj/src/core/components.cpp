#include "vqa/components.hpp"

#include <vector>

namespace vqa {

Connectivity connectivity_from_int(int n) {
  if (n == 6) return Connectivity::Six;
  if (n == 26) return Connectivity::TwentySix;
  throw Error(ErrorCode::InvalidArgument, "connectivity must be 6 or 26");
}

std::vector<std::vector<std::size_t>> Components::regions() const {
  std::vector<std::vector<std::size_t>> out(sizes.size());
  for (std::size_t l = 0; l < sizes.size(); ++l) out[l].reserve(sizes[l]);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 0) out[std::size_t(labels[i] - 1)].push_back(i);
  return out;
}

Components connected_components(const Mask& m, Connectivity connectivity) {
  const auto& g = m.geometry();
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];

  std::vector<std::array<int, 3>> offsets;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (connectivity == Connectivity::Six && manhattan != 1) continue;
        offsets.push_back({dx, dy, dz});
      }

  Components out;
  out.labels.assign(m.size(), 0);
  std::vector<std::size_t> stack;
  // scanning in linear order labels regions by their smallest voxel index
  for (std::size_t seed = 0; seed < m.size(); ++seed) {
    if (!m[seed] || out.labels[seed] != 0) continue;
    const auto label = static_cast<std::int32_t>(out.sizes.size() + 1);
    std::size_t size = 0;
    out.labels[seed] = label;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++size;
      const int i = int(cur % nx), j = int((cur / nx) % ny), k = int(cur / (std::size_t(nx) * ny));
      for (const auto& o : offsets) {
        const int a = i + o[0], b = j + o[1], c = k + o[2];
        if (a < 0 || b < 0 || c < 0 || a >= nx || b >= ny || c >= nz) continue;
        const std::size_t nb = g.index(a, b, c);
        if (m[nb] && out.labels[nb] == 0) {
          out.labels[nb] = label;
          stack.push_back(nb);
        }
      }
    }
    out.sizes.push_back(size);
  }
  return out;
}

}  // namespace vqa
