#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "launderscope/error.hpp"
#include "launderscope/image.hpp"
#include "launderscope/patch.hpp"
#include "launderscope/spectral.hpp"

namespace launderscope {

/// Linear discriminant over (peak_strength, low_freq_ratio, flatness).
/// A score above zero votes for `positive_class`.
struct ScorerModel {
  std::array<double, 3> weights{0.0, 0.0, 0.0};
  double bias = 0.0;
  ClassLabel positive_class = ClassLabel::Laundered;
  FeatureConfig feature_cfg;

  double score_features(const SpectralFeatures& f) const;
};

double score_patch(const ScorerModel& model, const Patch& patch);
double score_patch(const ScorerModel& model, const ImageBuffer& pixels);

/// Fisher discriminant with a ridge of 1e-6 * trace / 3 on the pooled
/// covariance; the bias puts the midpoint of the projected class means at 0.
/// Needs at least 10 samples per class.
ScorerModel calibrate_features(std::span<const SpectralFeatures> positives,
                               std::span<const SpectralFeatures> negatives,
                               const FeatureConfig& feature_cfg,
                               ClassLabel positive_class);

ScorerModel calibrate(std::span<const Patch> positives,
                      std::span<const Patch> negatives,
                      const FeatureConfig& feature_cfg,
                      ClassLabel positive_class = ClassLabel::Laundered);

std::string model_to_json(const ScorerModel& model);
ScorerModel model_from_json(const std::string& text);
void save_model(const ScorerModel& model, const std::filesystem::path& path);
ScorerModel load_model(const std::filesystem::path& path);

// ------------------------------------------------------------ external

/// Any failure talking to an external scorer. `phase()` names where it
/// happened: "launch", "handshake", "request" or "response".
class ScorerError : public Error {
 public:
  ScorerError(std::string phase, const std::string& what)
      : Error(ErrorKind::Scorer, "scorer " + phase + ": " + what),
        phase_(std::move(phase)) {}
  const std::string& phase() const noexcept { return phase_; }

 private:
  std::string phase_;
};

class ScorerLaunchError : public ScorerError {
 public:
  explicit ScorerLaunchError(const std::string& what) : ScorerError("launch", what) {}
};

class ScorerHandshakeError : public ScorerError {
 public:
  explicit ScorerHandshakeError(const std::string& what)
      : ScorerError("handshake", what) {}
};

/// The scorer replied, but the reply is not a single finite number.
class ScorerParseError : public ScorerError {
 public:
  ScorerParseError(const std::string& line, const std::string& why)
      : ScorerError("response", "malformed score line \"" + line + "\": " + why),
        line_(line) {}
  const std::string& line() const noexcept { return line_; }

 private:
  std::string line_;
};

class ScorerTimeoutError : public ScorerError {
 public:
  ScorerTimeoutError(const std::string& phase, std::chrono::milliseconds limit)
      : ScorerError(phase, "timed out after " + std::to_string(limit.count()) + " ms") {}
};

struct ExternalScorerConfig {
  std::vector<std::string> command;
  std::chrono::milliseconds timeout{10000};
};

inline constexpr std::string_view kScorerHello = "HELLO launder-scorer v1";

// ------------------------------------------------------------ scorer objects

class PatchScorer {
 public:
  virtual ~PatchScorer() = default;
  double score(const Patch& patch) {
    note_invocation();
    return do_score(patch);
  }
  std::size_t invocations() const noexcept {
    return invocations_.load(std::memory_order_relaxed);
  }

 protected:
  void note_invocation() noexcept {
    invocations_.fetch_add(1, std::memory_order_relaxed);
  }

 private:
  virtual double do_score(const Patch& patch) = 0;
  std::atomic<std::size_t> invocations_{0};
};

class BuiltinScorer final : public PatchScorer {
 public:
  explicit BuiltinScorer(ScorerModel model) : model_(std::move(model)) {}
  const ScorerModel& model() const noexcept { return model_; }
  /// Scores precomputed features; counts as one invocation.
  double score(const SpectralFeatures& features) {
    note_invocation();
    return model_.score_features(features);
  }
  using PatchScorer::score;

 private:
  double do_score(const Patch& patch) override { return score_patch(model_, patch); }
  ScorerModel model_;
};

/// One subprocess speaking the line protocol; requests are strictly
/// sequential. The process is launched and handshaken on construction and
/// asked to exit (stdin closed, then killed after 1 s) on destruction.
class ExternalScorer final : public PatchScorer {
 public:
  explicit ExternalScorer(ExternalScorerConfig cfg);
  ~ExternalScorer() override;
  ExternalScorer(const ExternalScorer&) = delete;
  ExternalScorer& operator=(const ExternalScorer&) = delete;

  /// Closes the scorer's input and reaps it. Returns its exit status, or
  /// -1 if it had to be killed.
  int shutdown();

 private:
  double do_score(const Patch& patch) override;
  std::string read_line(const std::string& phase);
  void write_all(const std::uint8_t* data, std::size_t n);

  ExternalScorerConfig cfg_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Launches the scorer, scores one patch and shuts it down.
double external_score(const ExternalScorerConfig& cfg, const Patch& patch);

using ScorerSpec = std::variant<ScorerModel, ExternalScorerConfig>;

std::unique_ptr<PatchScorer> make_scorer(const ScorerSpec& spec);

}  // namespace launderscope
