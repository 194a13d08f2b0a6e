#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "pddllm/summarizer.hpp"

namespace pddllm {

using nlohmann::json;

std::uint64_t approximate_tokens(const std::string& text) {
  return (text.size() + 3) / 4;
}

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string interval_text(const json& dim) {
  const bool lo_open = dim.value("lo_open", false);
  const bool hi_closed = dim.value("hi_closed", false);
  std::string s = lo_open ? "(" : "[";
  s += fixed4(dim.at("lo").get<double>());
  s += ", ";
  s += fixed4(dim.at("hi").get<double>());
  s += hi_closed ? "]" : ")";
  return s;
}

std::string value_text(const json& v) {
  if (v.is_array()) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i)
      s += (i ? ", " : "") + fixed4(v[i].get<double>());
    return s + ")";
  }
  return fixed4(v.get<double>());
}

const json& slot(const json& context, const char* key) {
  if (!context.contains(key)) throw MissingSlot(std::string("missing slot: ") + key);
  return context.at(key);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
  return s;
}

}  // namespace

std::string render_prompt(RequestKind kind, const json& context,
                          const std::string& task_description) {
  switch (kind) {
    case RequestKind::predicate_naming: {
      const int n = slot(context, "n_objects").get<int>();
      const std::string feature_kind = slot(context, "feature_kind").get<std::string>();
      std::string prompt = "There are " + std::to_string(n) +
                           " objects in the environment, whose " + feature_kind + " are " +
                           value_text(slot(context, "value_1"));
      if (context.contains("value_2"))
        prompt += " and " + value_text(context.at("value_2"));
      prompt += ".";
      for (const auto& dim : slot(context, "dims")) {
        prompt += " In " + dim.at("name").get<std::string>() + ", we know " +
                  dim.at("name").get<std::string>() + " in " + interval_text(dim) + ".";
      }
      if (task_description.empty()) throw MissingSlot("missing slot: task description");
      prompt += " Please create a predicate in PDDL syntax to describe this relation and "
                "classify if it is related to the task \"" +
                task_description +
                "\". Please return the result in the following format: predicate, relevance.";
      return prompt;
    }
    case RequestKind::action_naming: {
      const auto atoms_text = [](const json& atoms) {
        std::vector<std::string> parts;
        for (const auto& a : atoms) parts.push_back(a.get<std::string>());
        return join(parts, " ");
      };
      return "Current state: " + atoms_text(slot(context, "pre_atoms")) +
             "\nNext state: " + atoms_text(slot(context, "post_atoms")) +
             "\nCan you give this transition an action name to summarize and describe "
             "what happened. Please follow Planning Domain Definition Language syntax.";
    }
    case RequestKind::selection: {
      const std::string what = slot(context, "what").get<std::string>();
      std::vector<std::string> options;
      for (const auto& o : slot(context, "options")) options.push_back(o.get<std::string>());
      if (what == "action")
        return "Here is a list of actions describing the same robot skill: " +
               join(options, ", ") +
               ". Please choose the PDDL action from the provided ones to best describe "
               "the scenario. Return the chosen one in PDDL syntax.";
      return "Here is a list of predicate describing the same object state: " +
             join(options, ", ") +
             ". Please choose the PDDL predicate from the provided ones to best describe "
             "the scenario. Return the chosen one in PDDL syntax.";
    }
    case RequestKind::relevance: {
      const std::string predicate = slot(context, "predicate").get<std::string>();
      if (task_description.empty()) throw MissingSlot("missing slot: task description");
      return "Here is a predicate: " + predicate +
             ". Please classify if it is related to the task \"" + task_description +
             "\". Please return the result in the following format: relevance.";
    }
  }
  throw std::logic_error("unreachable");
}

SummarizerRequest SummarizerRequest::make(RequestKind kind, json context,
                                          std::string task_description) {
  SummarizerRequest request;
  request.kind = kind;
  request.rendered_prompt = render_prompt(kind, context, task_description);
  request.context = std::move(context);
  request.task_description = std::move(task_description);
  return request;
}

void TranscriptLog::record(const SummarizerRequest& request, const BackendReply& reply) {
  std::lock_guard lock(mutex_);
  prompt_tokens_ += reply.prompt_tokens;
  completion_tokens_ += reply.completion_tokens;
  ++calls_;
  if (path_.empty()) return;
  json line{{"kind", static_cast<int>(request.kind)},
            {"prompt", request.rendered_prompt},
            {"response", reply.ok ? reply.text : reply.error},
            {"ok", reply.ok},
            {"prompt_tokens", reply.prompt_tokens},
            {"completion_tokens", reply.completion_tokens}};
  std::ofstream out(path_, std::ios::app);
  out << line.dump() << "\n";
}

void TranscriptLog::reset_counters() {
  std::lock_guard lock(mutex_);
  prompt_tokens_ = completion_tokens_ = calls_ = 0;
}

// ---- oracle ----------------------------------------------------------------

namespace {

std::string offset_tag(int i) {
  if (i == 0) return "0";
  return (i > 0 ? "p" : "n") + std::to_string(std::abs(i));
}

struct NamedPredicate {
  std::string name;
  int widen = 0;  // merge the cells within +/- widen into the constraint
};

NamedPredicate oracle_predicate_name(const json& context) {
  const std::string family = context.value("family", "");
  const json& offsets = context.at("cell_offsets");

  auto off = [&](const std::string& feature) -> int {
    return offsets.contains(feature) ? offsets.at(feature).get<int>() : 0;
  };

  if (family == "relative_position") {
    const int ix = off("delta_x"), iy = off("delta_y"), iz = off("delta_z");
    if (ix == 0 && iy == 0 && iz > 0)
      return {iz == 1 ? "above" : "above_" + std::to_string(iz)};
    if (ix == 0 && iy == 0 && iz < 0)
      return {iz == -1 ? "below" : "below_" + std::to_string(-iz)};
    if (iz == 0 && std::abs(ix) + std::abs(iy) == 1) {
      if (ix == 1) return {"right_of"};
      if (ix == -1) return {"left_of"};
      if (iy == 1) return {"behind_of"};
      return {"front_of"};
    }
    return {"offset_x" + offset_tag(ix) + "_y" + offset_tag(iy) + "_z" + offset_tag(iz)};
  }
  if (family == "table_support") {
    const int iz = off("z_above_table");
    if (iz == 0) return {"on_table"};
    return {iz > 0 ? "raised_" + std::to_string(iz) : "sunken_" + std::to_string(-iz)};
  }
  if (family == "relative_color") {
    const int ir = off("delta_color_r"), ig = off("delta_color_g"), ib = off("delta_color_b");
    if (ir == 0 && ig == 0 && ib == 0) return {"similar_color", 1};
    if (std::abs(ir) >= 2 || std::abs(ig) >= 2 || std::abs(ib) >= 2) return {"distinct_color"};
    return {"differs_color_r" + offset_tag(ir) + "_g" + offset_tag(ig) + "_b" + offset_tag(ib)};
  }
  if (family == "relative_size") {
    const int iw = off("delta_w"), il = off("delta_l"), ih = off("delta_h");
    if (iw < 0 && il < 0 && ih < 0) return {"smaller"};
    if (iw > 0 && il > 0 && ih > 0) return {"larger"};
    if (iw == 0 && il == 0 && ih == 0) return {"same_size"};
    return {"size_mix_w" + offset_tag(iw) + "_l" + offset_tag(il) + "_h" + offset_tag(ih)};
  }
  return {"pred_" + family};
}

// Keyword families for the relevance verdict; a predicate is relevant when
// any of its keywords occurs in the task description.
const std::vector<std::pair<std::string, std::vector<std::string>>> kRelevanceKeywords = {
    {"above", {"stack", "tower", "top", "pile", "pyramid", "hanoi", "bridge"}},
    {"below", {"under", "below", "beneath"}},
    {"on_table", {"table"}},
    {"right_of", {"align", "row", "line", "next to", "beside"}},
    {"left_of", {"align", "row", "line", "next to", "beside"}},
    {"behind_of", {"align", "row", "line", "next to", "beside"}},
    {"front_of", {"align", "row", "line", "next to", "beside"}},
    {"similar_color", {"color", "sort", "group", "classif"}},
    {"distinct_color", {"color", "sort", "group", "classif"}},
    {"smaller", {"hanoi", "size", "disk", "disc", "small", "large"}},
    {"larger", {"hanoi", "size", "disk", "disc", "small", "large"}},
};

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool oracle_relevant(const std::string& predicate, const std::string& task) {
  const std::string t = lowercase(task);
  // quantified "every/all"-style forms are only relevant when asked for
  if (predicate.starts_with("forall_") && predicate.find("_not_") == std::string::npos)
    return t.find("all ") != std::string::npos || t.find("every") != std::string::npos;

  std::string base = predicate;
  if (base.starts_with("not_")) base = base.substr(4);
  if (base.starts_with("forall_")) {
    const auto pos = base.find("_not_");
    base = pos != std::string::npos ? base.substr(pos + 5) : base.substr(base.find('_', 7) + 1);
  }
  if (base.starts_with("exists_")) base = base.substr(base.find('_', 7) + 1);

  for (const auto& [name, keywords] : kRelevanceKeywords) {
    if (base != name) continue;
    for (const auto& kw : keywords)
      if (t.find(kw) != std::string::npos) return true;
    return false;
  }
  return false;  // offset_*, raised_*, above_k and friends stay out of domains
}

std::string oracle_action_name(const json& context) {
  auto atoms_of = [&](const char* key) {
    std::vector<std::string> out;
    if (context.contains(key))
      for (const auto& a : context.at(key)) out.push_back(a.get<std::string>());
    return out;
  };
  const auto added = atoms_of("added");
  const auto deleted = atoms_of("deleted");

  auto any_with = [](const std::vector<std::string>& atoms, const std::string& pred) {
    return std::any_of(atoms.begin(), atoms.end(), [&](const std::string& a) {
      return a.starts_with("(" + pred + " ") || a == "(" + pred + ")";
    });
  };

  if (any_with(added, "above")) return "stack";
  if (any_with(deleted, "above")) return "unstack";
  if (any_with(added, "on_table")) return "put_down";
  if (any_with(deleted, "on_table")) return "pick_up";
  for (const char* side : {"right_of", "left_of", "behind_of", "front_of"})
    if (any_with(added, side)) return "align";

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& a : added) {
    for (char c : a) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  }
  for (const auto& a : deleted) {
    for (char c : a) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  }
  return "act_" + std::to_string(h % 100000);
}

BackendReply make_reply(const SummarizerRequest& request, const std::string& text) {
  BackendReply reply;
  reply.ok = true;
  reply.text = text;
  reply.prompt_tokens = approximate_tokens(request.rendered_prompt);
  reply.completion_tokens = approximate_tokens(text);
  return reply;
}

}  // namespace

BackendReply OracleBackend::complete(const SummarizerRequest& request) {
  switch (request.kind) {
    case RequestKind::predicate_naming: {
      const NamedPredicate named = oracle_predicate_name(request.context);
      const int arity = request.context.value("n_objects", 2);
      std::string head = "(" + named.name;
      for (int i = 0; i < arity; ++i) head += std::string(" ?") + static_cast<char>('a' + i);
      head += ")";
      std::string text = head;
      text += oracle_relevant(named.name, request.task_description) ? ", relevant"
                                                                    : ", irrelevant";
      if (named.widen > 0) text += ", widen=" + std::to_string(named.widen);
      return make_reply(request, text);
    }
    case RequestKind::action_naming:
      return make_reply(request, oracle_action_name(request.context));
    case RequestKind::selection: {
      const auto& options = request.context.at("options");
      if (options.empty()) return make_reply(request, "");
      return make_reply(request, options[0].get<std::string>());
    }
    case RequestKind::relevance: {
      const std::string predicate = request.context.value("predicate", "");
      return make_reply(request,
                        oracle_relevant(predicate, request.task_description) ? "relevant"
                                                                             : "irrelevant");
    }
  }
  throw std::logic_error("unreachable");
}

// ---- remote ---------------------------------------------------------------

RemoteBackend::Config RemoteBackend::config_from_env() {
  Config config;
  if (const char* url = std::getenv("BACKEND_URL")) config.url = url;
  if (const char* key = std::getenv("BACKEND_KEY")) config.key = key;
  if (const char* model = std::getenv("BACKEND_MODEL")) config.model = model;
  if (config.url.empty())
    throw std::runtime_error("BACKEND_URL is not set; remote backend unavailable");
  return config;
}

BackendReply RemoteBackend::complete(const SummarizerRequest& request) {
  BackendReply reply;

  // split url into base and path
  std::string base = config_.url;
  std::string path = "/";
  const auto scheme_end = base.find("://");
  const auto path_start = base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start != std::string::npos) {
    path = base.substr(path_start);
    base = base.substr(0, path_start);
  }

  const json body{{"model", config_.model},
                  {"messages", json::array({json{{"role", "user"},
                                                 {"content", request.rendered_prompt}}})}};

  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    httplib::Client client(base);
    client.set_read_timeout(std::chrono::milliseconds(
        static_cast<int>(config_.timeout_seconds * 1000)));
    httplib::Headers headers;
    if (!config_.key.empty()) headers.emplace("Authorization", "Bearer " + config_.key);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res || res->status < 200 || res->status >= 300) {
      reply.error = !res ? "transport error" : "http status " + std::to_string(res->status);
      continue;
    }
    try {
      const json parsed = json::parse(res->body);
      reply.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
      if (parsed.contains("usage")) {
        reply.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
        reply.completion_tokens = parsed["usage"].value("completion_tokens", 0);
      } else {
        reply.prompt_tokens = approximate_tokens(request.rendered_prompt);
        reply.completion_tokens = approximate_tokens(reply.text);
      }
      reply.ok = true;
      return reply;
    } catch (const json::exception& e) {
      reply.error = std::string("malformed response: ") + e.what();
    }
  }
  reply.ok = false;
  if (reply.error.empty()) reply.error = "backend unreachable";
  return reply;
}

// ---- fault injection / scripts ----------------------------------------

BackendReply FaultInjectingBackend::complete(const SummarizerRequest& request) {
  if (failing_) {
    BackendReply reply;
    reply.ok = true;  // the model "responded", but with unusable output
    reply.text = ")((malformed %% output";
    reply.prompt_tokens = approximate_tokens(request.rendered_prompt);
    reply.completion_tokens = 4;
    return reply;
  }
  return inner_->complete(request);
}

BackendReply ScriptedBackend::complete(const SummarizerRequest& request) {
  BackendReply reply;
  if (next_ >= replies_.size()) {
    reply.error = "script exhausted";
    return reply;
  }
  reply.ok = true;
  reply.text = replies_[next_++];
  reply.prompt_tokens = approximate_tokens(request.rendered_prompt);
  reply.completion_tokens = approximate_tokens(reply.text);
  return reply;
}

}  // namespace pddllm
