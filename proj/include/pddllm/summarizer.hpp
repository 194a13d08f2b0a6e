#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pddllm/rng.hpp"

namespace pddllm {

enum class RequestKind { predicate_naming, action_naming, selection, relevance };

struct MissingSlot : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every prompt is rendered from a fixed template plus a structured context;
// free-form prompts are not representable.
struct SummarizerRequest {
  RequestKind kind = RequestKind::predicate_naming;
  std::string rendered_prompt;
  nlohmann::json context;
  std::string task_description;

  static SummarizerRequest make(RequestKind kind, nlohmann::json context,
                                std::string task_description);
};

// Deterministic template rendering; interval bounds are printed with fixed
// precision. Throws MissingSlot when the context lacks a template slot.
std::string render_prompt(RequestKind kind, const nlohmann::json& context,
                          const std::string& task_description);

struct BackendReply {
  bool ok = false;
  std::string text;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  std::string error;
};

class TranscriptLog {
 public:
  TranscriptLog() = default;
  explicit TranscriptLog(std::string path) : path_(std::move(path)) {}

  void record(const SummarizerRequest& request, const BackendReply& reply);
  std::uint64_t total_prompt_tokens() const { return prompt_tokens_; }
  std::uint64_t total_completion_tokens() const { return completion_tokens_; }
  std::uint64_t total_tokens() const { return prompt_tokens_ + completion_tokens_; }
  std::uint64_t calls() const { return calls_; }
  void reset_counters();

 private:
  std::string path_;
  mutable std::mutex mutex_;
  std::uint64_t prompt_tokens_ = 0;
  std::uint64_t completion_tokens_ = 0;
  std::uint64_t calls_ = 0;
};

class SummarizerBackend {
 public:
  virtual ~SummarizerBackend() = default;
  virtual BackendReply complete(const SummarizerRequest& request) = 0;
  // Called once before each candidate generation so per-candidate behavior
  // (e.g. injected faults) can be seeded deterministically.
  virtual void begin_candidate(std::uint64_t /*seed*/) {}
  virtual std::string name() const = 0;
};

// Rule-based summarizer. Names subspaces from their cell offsets (above,
// below, on_table, right_of, similar_color, ...), names transitions from
// their effect pattern (stack, unstack, put_down, ...), and judges relevance
// by task keywords. Fully deterministic, so repeated candidate generations
// coincide and tests never depend on a live model.
class OracleBackend : public SummarizerBackend {
 public:
  BackendReply complete(const SummarizerRequest& request) override;
  std::string name() const override { return "oracle"; }
};

// JSON-over-HTTP chat endpoint, configured by BACKEND_URL / BACKEND_KEY /
// BACKEND_MODEL. Two retries per call, then the reply reports failure.
class RemoteBackend : public SummarizerBackend {
 public:
  struct Config {
    std::string url;    // e.g. http://host:port/v1/chat/completions
    std::string key;
    std::string model;
    int retries = 2;
    double timeout_seconds = 30.0;
  };
  explicit RemoteBackend(Config config) : config_(std::move(config)) {}
  static Config config_from_env();

  BackendReply complete(const SummarizerRequest& request) override;
  std::string name() const override { return "remote"; }

 private:
  Config config_;
};

// Wraps another backend and corrupts every reply of a failing candidate;
// candidates fail independently with the given probability.
class FaultInjectingBackend : public SummarizerBackend {
 public:
  FaultInjectingBackend(std::shared_ptr<SummarizerBackend> inner, double failure_probability)
      : inner_(std::move(inner)), failure_probability_(failure_probability) {}

  void begin_candidate(std::uint64_t seed) override {
    Rng rng(derive_seed(seed, "fault"));
    failing_ = rng.bernoulli(failure_probability_);
    inner_->begin_candidate(seed);
  }

  BackendReply complete(const SummarizerRequest& request) override;
  std::string name() const override { return "fault(" + inner_->name() + ")"; }

 private:
  std::shared_ptr<SummarizerBackend> inner_;
  double failure_probability_;
  bool failing_ = false;
};

// Replays a fixed list of responses; for tests.
class ScriptedBackend : public SummarizerBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  BackendReply complete(const SummarizerRequest& request) override;
  std::string name() const override { return "scripted"; }

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

// Logging wrapper used by the pipeline around any backend.
class LoggedBackend : public SummarizerBackend {
 public:
  LoggedBackend(std::shared_ptr<SummarizerBackend> inner, TranscriptLog* log)
      : inner_(std::move(inner)), log_(log) {}
  BackendReply complete(const SummarizerRequest& request) override {
    BackendReply reply = inner_->complete(request);
    if (log_) log_->record(request, reply);
    return reply;
  }
  void begin_candidate(std::uint64_t seed) override { inner_->begin_candidate(seed); }
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<SummarizerBackend> inner_;
  TranscriptLog* log_;
};

std::uint64_t approximate_tokens(const std::string& text);

}  // namespace pddllm
