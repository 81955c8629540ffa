#include "vqa/mar.hpp"

#include <algorithm>

#include "vqa/error.hpp"
#include "vqa/metrics.hpp"

namespace vqa {

namespace {

constexpr std::string_view kBandNames[] = {"under70", "70-75", "75-80", "80-85", "over85", "general"};

}  // namespace

std::string_view to_string(AgeBand band) { return kBandNames[static_cast<int>(band)]; }

AgeBand age_band_from_string(std::string_view s) {
  for (int i = 0; i < 6; ++i)
    if (kBandNames[i] == s) return static_cast<AgeBand>(i);
  throw Error(ErrorCode::InvalidArgument, "unknown age band '" + std::string(s) + "'");
}

int age_rank(AgeBand band) { return band == AgeBand::General ? 3 : static_cast<int>(band) + 1; }

std::string_view to_string(Strategy s) { return s == Strategy::VentricleDice ? "dice" : "cc"; }

Strategy strategy_from_string(std::string_view s) {
  if (s == "dice") return Strategy::VentricleDice;
  if (s == "cc") return Strategy::CrossCorrelation;
  throw Error(ErrorCode::InvalidArgument, "unknown strategy '" + std::string(s) + "'");
}

const Atlas& AtlasSet::general() const {
  for (const auto& a : atlases)
    if (a.is_general()) return a;
  throw Error(ErrorCode::InvalidArgument, "atlas set has no general atlas");
}

const Atlas& AtlasSet::by_id(const std::string& id) const {
  for (const auto& a : atlases)
    if (a.id == id) return a;
  throw Error(ErrorCode::InvalidArgument, "no atlas with id '" + id + "'");
}

void AtlasSet::validate() const {
  int n_general = 0;
  for (const auto& a : atlases) {
    if (a.is_general()) ++n_general;
    for (const auto& b : atlases)
      if (&a != &b && a.id == b.id) throw Error(ErrorCode::InvalidArgument, "duplicate atlas id '" + a.id + "'");
  }
  if (n_general != 1) throw Error(ErrorCode::InvalidArgument, "atlas set needs exactly one general atlas");
  if (count(ventricles_general) == 0) throw Error(ErrorCode::InvalidArgument, "general-atlas ventricles are empty");
  if (!same_grid(ventricles_general.geometry(), general().image.geometry()))
    throw Error(ErrorCode::GeometryMismatch, "general-atlas ventricles are not on the general grid");
}

Mask propagate_ventricles(const AtlasSet& s, const Atlas& a, const Registration& subject_to_atlas,
                          const Geometry& subject_grid) {
  if (!a.from_general.is_affine() && !same_grid(a.from_general.field().geometry, a.image.geometry()))
    throw Error(ErrorCode::GeometryMismatch, "atlas inverse transform is not on the atlas grid");
  const Transform& inv = subject_to_atlas.inverse;
  if (!inv.is_affine() && !same_grid(inv.field().geometry, subject_grid))
    throw Error(ErrorCode::GeometryMismatch, "registration inverse is not on the subject grid");
  Transform chain = compose(inv, a.from_general, subject_grid);
  return warp(s.ventricles_general, chain, subject_grid);
}

double quality_dice(const Mask& segmented, const Mask& propagated, std::vector<std::string>* flags) {
  if (!same_grid(segmented.geometry(), propagated.geometry()))
    throw Error(ErrorCode::GeometryMismatch, "quality_dice: masks on different grids");
  auto c = confusion(segmented, propagated);
  if (c.tp + c.fp + c.fn == 0) {
    if (flags) flags->emplace_back(kVentriclesNotIdentifiable);
    return 0.0;
  }
  return dice(c);
}

MarEvaluation evaluate_atlases(const Volume& image, const Mask& segmented_ventricles, const AtlasSet& s,
                               const RegParams& p) {
  s.validate();
  p.validate();
  if (!same_grid(image.geometry(), segmented_ventricles.geometry()))
    throw Error(ErrorCode::GeometryMismatch, "segmented ventricles are not on the image grid");
  MarEvaluation e;
  e.outcomes.resize(s.atlases.size());
  for (std::size_t i = 0; i < s.atlases.size(); ++i) {
    const Atlas& a = s.atlases[i];
    AtlasOutcome& o = e.outcomes[i];
    o.atlas_id = a.id;
    try {
      Registration r = register_images(image, a.image, p);
      Mask prop = propagate_ventricles(s, a, r, image.geometry());
      o.dice_quality = quality_dice(segmented_ventricles, prop, &o.warnings);
      o.cc_quality = r.cc_after;
      for (const auto& w : r.warnings) o.warnings.push_back(w);
      o.registration = std::move(r);
    } catch (const Error& err) {
      o.warnings.emplace_back(err.what());
      o.registration.reset();
      o.dice_quality.reset();
      o.cc_quality.reset();
    }
  }
  return e;
}

std::string select_atlas(const std::map<std::string, std::optional<double>>& quality, const AtlasSet& s) {
  const Atlas* best = nullptr;
  double best_q = 0;
  auto preferred = [](const Atlas& x, const Atlas& y) {
    if (x.is_general() != y.is_general()) return x.is_general();
    return static_cast<int>(x.age_band) < static_cast<int>(y.age_band);
  };
  for (const auto& a : s.atlases) {
    auto it = quality.find(a.id);
    if (it == quality.end() || !it->second) continue;
    double q = *it->second;
    if (!best || q > best_q || (q == best_q && preferred(a, *best))) {
      best = &a;
      best_q = q;
    }
  }
  if (!best) throw Error(ErrorCode::AllRegistrationsFailed, "no atlas produced a registration quality");
  return best->id;
}

MarResult finalize_mar(const MarEvaluation& e, const AtlasSet& s, Strategy strategy) {
  MarResult r;
  r.strategy = strategy;
  for (const auto& o : e.outcomes) {
    r.dice_quality[o.atlas_id] = o.dice_quality;
    r.cc_quality[o.atlas_id] = o.cc_quality;
    for (const auto& w : o.warnings) r.flags.push_back(o.atlas_id + ": " + w);
  }
  r.per_atlas_quality = strategy == Strategy::VentricleDice ? r.dice_quality : r.cc_quality;
  r.selected = select_atlas(r.per_atlas_quality, s);

  const Atlas& b = s.by_id(r.selected);
  const Atlas& g = s.general();
  const AtlasOutcome* ob = nullptr;
  for (const auto& o : e.outcomes)
    if (o.atlas_id == b.id) ob = &o;
  const Transform& t_xb = ob->registration->forward;
  if (b.is_general())
    r.final_transform = t_xb;
  else
    r.final_transform = compose(b.to_general, t_xb, g.image.geometry());

  r.general_id = g.id;
  if (!r.dice_quality[g.id] || !r.dice_quality[r.selected]) {
    r.flags.emplace_back("general-atlas quality missing; gain undefined");
    r.gain = 0;
  } else {
    r.gain = gain(r);
  }
  return r;
}

MarResult run_mar(const Volume& image, const Mask& segmented_ventricles, const AtlasSet& s, const RegParams& p,
                  Strategy strategy) {
  return finalize_mar(evaluate_atlases(image, segmented_ventricles, s, p), s, strategy);
}

double gain(const MarResult& r) {
  auto qg = r.dice_quality.find(r.general_id);
  if (qg == r.dice_quality.end() || !qg->second)
    throw Error(ErrorCode::MissingGeneralQuality, "general-atlas quality missing");
  if (r.selected == r.general_id) return 0.0;
  auto qb = r.dice_quality.find(r.selected);
  if (qb == r.dice_quality.end() || !qb->second)
    throw Error(ErrorCode::InvalidArgument, "selected atlas has no ventricle quality");
  return *qb->second - *qg->second;
}

Volume build_general_atlas(std::span<const Volume> aligned) {
  if (aligned.empty()) throw Error(ErrorCode::EmptyList, "build_general_atlas: no volumes");
  for (const auto& v : aligned)
    if (!same_grid(v.geometry(), aligned[0].geometry()))
      throw Error(ErrorCode::GeometryMismatch, "build_general_atlas: volumes on different grids");
  Volume out(aligned[0].geometry());
  const std::size_t n = out.size();
  std::vector<double> acc(n, 0.0);
  for (const auto& v : aligned)
    for (std::size_t i = 0; i < n; ++i) acc[i] += v[i];
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(acc[i] / static_cast<double>(aligned.size()));
  return out;
}

}  // namespace vqa
