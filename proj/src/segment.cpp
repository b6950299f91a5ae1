#include "video2plan/segment.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>

namespace video2plan {

Frame SegmentationConfig::merge_tolerance(double fps) const {
  if (boundary_merge_tol) return *boundary_merge_tol;
  return static_cast<Frame>(std::floor(fps / 6.0));
}

void SegmentationConfig::validate() const {
  const bool finite = std::isfinite(lambda_reg) && std::isfinite(min_gain) && std::isfinite(min_segment_s) &&
                      std::isfinite(max_interp_gap_s);
  if (!finite) throw std::invalid_argument("segmentation config: all fields must be finite");
  if (!(lambda_reg > 0)) throw std::invalid_argument("segmentation config: lambda_reg must be > 0");
  if (max_breakpoints < 0) throw std::invalid_argument("segmentation config: max_breakpoints must be >= 0");
  if (min_gain < 0) throw std::invalid_argument("segmentation config: min_gain must be >= 0");
  if (min_segment_s < 0) throw std::invalid_argument("segmentation config: min_segment_s must be >= 0");
  if (boundary_merge_tol && *boundary_merge_tol < 0) {
    throw std::invalid_argument("segmentation config: boundary_merge_tol must be >= 0");
  }
  if (min_samples < 1) throw std::invalid_argument("segmentation config: min_samples must be >= 1");
}

std::vector<std::span<const TrajectorySample>> HandTrajectory::chunks() const {
  std::vector<std::span<const TrajectorySample>> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const Frame next_missing = samples[i].frame + 1;
    const bool split = std::any_of(gaps.begin(), gaps.end(), [&](const FrameRange& g) { return g.begin == next_missing; });
    if (split) {
      out.emplace_back(samples.data() + begin, i + 1 - begin);
      begin = i + 1;
    }
  }
  if (begin < samples.size()) out.emplace_back(samples.data() + begin, samples.size() - begin);
  return out;
}

HandTrajectory extract_trajectory(const DetectionStream& stream, const HandKey& hand, const SegmentationConfig& cfg) {
  HandTrajectory traj;
  traj.hand = hand;
  std::vector<TrajectorySample> detected;
  for (const auto& f : stream.frames) {
    for (const auto& h : f.hands) {
      if (h.person == hand.person && h.side == hand.side) {
        detected.push_back({f.frame_index, h.box.center_x(), h.box.center_y(), false});
      }
    }
  }
  if (detected.empty()) throw Error("hand " + hand.str() + " never detected");
  if (detected.size() < 2) throw Error("insufficient samples for hand " + hand.str());

  traj.samples.push_back(detected.front());
  for (std::size_t i = 1; i < detected.size(); ++i) {
    const auto& a = detected[i - 1];
    const auto& b = detected[i];
    const Frame missing = b.frame - a.frame - 1;
    if (missing > 0) {
      if (static_cast<double>(missing) / stream.fps <= cfg.max_interp_gap_s) {
        const double span = static_cast<double>(b.frame - a.frame);
        for (Frame f = a.frame + 1; f < b.frame; ++f) {
          const double t = static_cast<double>(f - a.frame) / span;
          traj.samples.push_back({f, a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), true});
        }
      } else {
        traj.gaps.push_back({a.frame + 1, b.frame});
      }
    }
    traj.samples.push_back(b);
  }
  return traj;
}

double segment_loglik(const Eigen::Ref<const Eigen::MatrixXd>& samples, double lambda_reg) {
  const auto m = static_cast<double>(samples.rows());
  const auto n = samples.cols();
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  Eigen::MatrixXd sigma = (centered.transpose() * centered) / m;
  sigma.diagonal().array() += lambda_reg / m;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
  const double logdet = ldlt.vectorD().array().log().sum();
  return -(m / 2.0) * (logdet + static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + static_cast<double>(n));
}

SegmentCost::SegmentCost(const Eigen::Ref<const Eigen::MatrixXd>& samples, double lambda_reg)
    : rows_(samples.rows()), cols_(samples.cols()), lambda_(lambda_reg) {
  const Eigen::RowVectorXd mean = rows_ > 0 ? Eigen::RowVectorXd(samples.colwise().mean())
                                            : Eigen::RowVectorXd::Zero(cols_);
  sum_ = Eigen::MatrixXd::Zero(rows_ + 1, cols_);
  outer_.assign(static_cast<std::size_t>(rows_ + 1), Eigen::MatrixXd::Zero(cols_, cols_));
  for (Eigen::Index i = 0; i < rows_; ++i) {
    const Eigen::RowVectorXd x = samples.row(i) - mean;
    sum_.row(i + 1) = sum_.row(i) + x;
    outer_[static_cast<std::size_t>(i + 1)] = outer_[static_cast<std::size_t>(i)] + x.transpose() * x;
  }
}

double SegmentCost::operator()(Eigen::Index begin, Eigen::Index end) const {
  const double m = static_cast<double>(end - begin);
  const Eigen::VectorXd mu = (sum_.row(end) - sum_.row(begin)).transpose() / m;
  Eigen::MatrixXd sigma =
      (outer_[static_cast<std::size_t>(end)] - outer_[static_cast<std::size_t>(begin)]) / m - mu * mu.transpose();
  sigma.diagonal().array() += lambda_ / m;
  double logdet = 0;
  if (cols_ == 2) {
    logdet = std::log(sigma(0, 0) * sigma(1, 1) - sigma(0, 1) * sigma(1, 0));
  } else {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
    logdet = ldlt.vectorD().array().log().sum();
  }
  const double n = static_cast<double>(cols_);
  return -(m / 2.0) * (logdet + n * std::log(2.0 * std::numbers::pi) + n);
}

Eigen::MatrixXd trajectory_features(std::span<const TrajectorySample> chunk, bool use_velocity) {
  const auto m = static_cast<Eigen::Index>(chunk.size());
  Eigen::MatrixXd x(m, use_velocity ? 4 : 2);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& s = chunk[static_cast<std::size_t>(i)];
    x(i, 0) = s.x;
    x(i, 1) = s.y;
    if (use_velocity) {
      const auto& p = chunk[static_cast<std::size_t>(i > 0 ? i - 1 : 0)];
      x(i, 2) = s.x - p.x;
      x(i, 3) = s.y - p.y;
    }
  }
  return x;
}

namespace {

double relative_gain(double gain, double objective) {
  if (objective == 0) return gain > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  return gain / std::abs(objective);
}

bool improves(double candidate, double current) { return candidate > current + 1e-10 * (1.0 + std::abs(current)); }

}  // namespace

GgsResult ggs_breakpoints(const Eigen::Ref<const Eigen::MatrixXd>& features, std::span<const Frame> frames,
                          const SegmentationConfig& cfg) {
  cfg.validate();
  GgsResult result;
  const Eigen::Index m = features.rows();
  const Eigen::Index min_len = cfg.min_samples;
  if (m < 2 * min_len || static_cast<std::size_t>(m) != frames.size()) return result;

  const SegmentCost cost(features, cfg.lambda_reg);
  std::vector<Eigen::Index> bps{0, m};
  auto total = [&] {
    double sum = 0;
    for (std::size_t k = 0; k + 1 < bps.size(); ++k) sum += cost(bps[k], bps[k + 1]);
    return sum;
  };
  double objective = total();
  result.objective_trace.push_back(objective);

  while (static_cast<int>(bps.size()) - 2 < cfg.max_breakpoints) {
    double best_gain = -std::numeric_limits<double>::infinity();
    Eigen::Index best_t = -1;
    for (std::size_t k = 0; k + 1 < bps.size(); ++k) {
      const Eigen::Index a = bps[k], b = bps[k + 1];
      if (b - a < 2 * min_len) continue;
      const double base = cost(a, b);
      for (Eigen::Index t = a + min_len; t <= b - min_len; ++t) {
        const double gain = cost(a, t) + cost(t, b) - base;
        if (gain > best_gain) {
          best_gain = gain;
          best_t = t;
        }
      }
    }
    if (best_t < 0 || !(best_gain > 0) || relative_gain(best_gain, objective) < cfg.min_gain) break;

    bps.insert(std::upper_bound(bps.begin(), bps.end(), best_t), best_t);
    objective = total();
    result.objective_trace.push_back(objective);

    // Move each breakpoint to its best position between fixed neighbours.
    for (int sweep = 0; sweep < 100; ++sweep) {
      bool moved = false;
      for (std::size_t i = 1; i + 1 < bps.size(); ++i) {
        const Eigen::Index a = bps[i - 1], b = bps[i + 1];
        const double current = cost(a, bps[i]) + cost(bps[i], b);
        double best = current;
        Eigen::Index best_pos = bps[i];
        for (Eigen::Index t = a + min_len; t <= b - min_len; ++t) {
          const double v = cost(a, t) + cost(t, b);
          if (improves(v, best)) {
            best = v;
            best_pos = t;
          }
        }
        if (best_pos != bps[i]) {
          bps[i] = best_pos;
          moved = true;
        }
      }
      if (!moved) break;
      objective = total();
      result.objective_trace.push_back(objective);
    }
  }

  for (std::size_t i = 1; i + 1 < bps.size(); ++i) {
    result.indices.push_back(bps[i]);
    result.breakpoints.push_back(frames[static_cast<std::size_t>(bps[i])]);
  }
  return result;
}

GgsResult ggs_breakpoints(std::span<const TrajectorySample> chunk, const SegmentationConfig& cfg) {
  std::vector<Frame> frames;
  frames.reserve(chunk.size());
  for (const auto& s : chunk) frames.push_back(s.frame);
  return ggs_breakpoints(trajectory_features(chunk, cfg.use_velocity), frames, cfg);
}

SegmentSequence union_segments(const std::map<HandKey, std::vector<Frame>>& per_hand, Frame length, double fps,
                               const SegmentationConfig& cfg) {
  SegmentSequence out;
  if (length <= 0) return out;

  std::map<Frame, std::set<HandKey>> raw{{0, {}}, {length, {}}};
  for (const auto& [hand, bps] : per_hand) {
    for (Frame b : bps) {
      if (b < 0 || b > length) throw std::invalid_argument("union_segments: breakpoint outside [0, length]");
      raw[b].insert(hand);
    }
  }

  // Coalesce runs of boundaries closer than the tolerance. The stream ends
  // are pinned; interior clusters move to the floor of their mean.
  const Frame tol = cfg.merge_tolerance(fps);
  std::vector<std::pair<Frame, std::set<HandKey>>> boundaries;
  std::vector<std::pair<Frame, std::set<HandKey>>> cluster;
  auto flush = [&] {
    if (cluster.empty()) return;
    std::set<HandKey> sources;
    Frame sum = 0;
    bool has_start = false, has_end = false;
    for (const auto& [b, s] : cluster) {
      sources.insert(s.begin(), s.end());
      sum += b;
      has_start |= b == 0;
      has_end |= b == length;
    }
    if (has_start && has_end) {
      boundaries.push_back({0, sources});
      boundaries.push_back({length, sources});
    } else {
      const Frame at = has_start ? 0 : has_end ? length : sum / static_cast<Frame>(cluster.size());
      boundaries.push_back({at, std::move(sources)});
    }
    cluster.clear();
  };
  for (auto& entry : raw) {
    if (!cluster.empty() && entry.first - cluster.back().first >= tol) flush();
    cluster.push_back(entry);
  }
  flush();

  // Drop sub-minimum segments: each is absorbed into its predecessor, the
  // first one into its successor.
  const double min_frames = cfg.min_segment_s * fps;
  std::size_t i = 0;
  while (i + 1 < boundaries.size() && boundaries.size() > 2) {
    const auto len = static_cast<double>(boundaries[i + 1].first - boundaries[i].first);
    if (len < min_frames) {
      boundaries.erase(boundaries.begin() + static_cast<std::ptrdiff_t>(i == 0 ? 1 : i));
      if (i > 0) --i;
    } else {
      ++i;
    }
  }

  for (std::size_t k = 0; k + 1 < boundaries.size(); ++k) {
    Segment s{boundaries[k].first, boundaries[k + 1].first, boundaries[k].second};
    s.sources.insert(boundaries[k + 1].second.begin(), boundaries[k + 1].second.end());
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::map<HandKey, HandTrajectory> all_trajectories(const DetectionStream& stream, const SegmentationConfig& cfg) {
  std::map<HandKey, int> counts;
  for (const auto& f : stream.frames) {
    for (const auto& h : f.hands) ++counts[h.key()];
  }
  std::map<HandKey, HandTrajectory> out;
  for (const auto& [hand, n] : counts) {
    if (n >= 2) out.emplace(hand, extract_trajectory(stream, hand, cfg));
  }
  return out;
}

std::vector<Frame> hand_breakpoints(const HandTrajectory& traj, const SegmentationConfig& cfg) {
  std::vector<Frame> out;
  for (const auto& chunk : traj.chunks()) {
    out.push_back(chunk.front().frame);
    for (Frame b : ggs_breakpoints(chunk, cfg).breakpoints) out.push_back(b);
    out.push_back(chunk.back().frame + 1);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

SegmentationResult segment_stream(const DetectionStream& stream, const SegmentationConfig& cfg) {
  cfg.validate();
  SegmentationResult result;
  result.trajectories = all_trajectories(stream, cfg);
  for (const auto& [hand, traj] : result.trajectories) result.breakpoints[hand] = hand_breakpoints(traj, cfg);
  result.segments = union_segments(result.breakpoints, stream.length(), stream.fps, cfg);
  return result;
}

std::map<std::string, SegmentSequence> segment_stream_per_person(const DetectionStream& stream,
                                                                  const SegmentationConfig& cfg) {
  const auto full = segment_stream(stream, cfg);
  std::map<std::string, std::map<HandKey, std::vector<Frame>>> by_person;
  for (const auto& [hand, bps] : full.breakpoints) by_person[hand.person][hand] = bps;
  std::map<std::string, SegmentSequence> out;
  for (const auto& [person, hands] : by_person) {
    out[person] = union_segments(hands, stream.length(), stream.fps, cfg);
  }
  return out;
}

void write_segments(const SegmentSequence& segments, std::ostream& out) {
  for (const auto& s : segments) {
    out << s.start_frame << ' ' << s.end_frame << ' ';
    if (s.sources.empty()) {
      out << '-';
    } else {
      bool first = true;
      for (const auto& h : s.sources) {
        out << (first ? "" : ",") << h.str();
        first = false;
      }
    }
    out << '\n';
  }
}

SegmentSequence parse_segments(std::istream& in) {
  SegmentSequence out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Segment s;
    std::string sources;
    if (!(ls >> s.start_frame >> s.end_frame >> sources)) {
      throw InputError("malformed segment at line " + std::to_string(line_no), line_no);
    }
    if (sources != "-") {
      std::istringstream ss(sources);
      std::string key;
      while (std::getline(ss, key, ',')) s.sources.insert(HandKey::parse(key));
    }
    if (s.start_frame >= s.end_frame || (!out.empty() && s.start_frame < out.back().end_frame)) {
      throw InputError("segments must be non-empty, ordered and disjoint (line " + std::to_string(line_no) + ")",
                       line_no);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_segments(const SegmentSequence& segments, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_segments(segments, out);
}

SegmentSequence load_segments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open segments file " + path.string());
  return parse_segments(in);
}

void write_hand_timeline(const SegmentationResult& result, std::ostream& out) {
  out << "hand,frame,segment_id\n";
  for (const auto& [hand, traj] : result.trajectories) {
    const auto& bps = result.breakpoints.at(hand);
    std::size_t next = 0;
    int id = -1;
    for (const auto& s : traj.samples) {
      while (next < bps.size() && bps[next] <= s.frame) {
        ++next;
        ++id;
      }
      out << hand.str() << ',' << s.frame << ',' << std::max(id, 0) << '\n';
    }
  }
}

}  // namespace video2plan
