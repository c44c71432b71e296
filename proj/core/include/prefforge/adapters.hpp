#ifndef PREFFORGE_ADAPTERS_HPP_
#define PREFFORGE_ADAPTERS_HPP_

#include <map>
#include <memory>
#include <string>

#include "prefforge/pipeline.hpp"
#include "prefforge/templates.hpp"

namespace prefforge {

// Pluggable judge/scorer transports. Spec grammar:
//   [name=]kind:target[?key=value&key=value]
// kinds: stub (deterministic synthetic backend, target = world file),
//        cmd  (shell command; payload JSON on stdin, reply on stdout),
//        http (POST to URL; JSON payload, reply in the body).
struct AdapterSpec {
  std::string name;
  std::string kind;
  std::string target;
  std::map<std::string, std::string> options;

  double option_or(const std::string& key, double fallback) const;

  static AdapterSpec parse(const std::string& text);
};

/// Shells out: writes the payload to the command's stdin, returns stdout.
/// A positive timeout (seconds) kills the command via timeout(1).
std::string run_command_adapter(const std::string& command,
                                const std::string& payload,
                                double timeout_seconds = 0.0);

/// POSTs `payload` as application/json, returns the response body.
std::string run_http_adapter(const std::string& url,
                             const std::string& payload,
                             double timeout_seconds = 30.0);

/// Scorer over a cmd or http transport. The request carries the quadruple,
/// the sampling parameters, and the rendered prompt; the reply is raw trace
/// text.
std::unique_ptr<ScorerClient> make_transport_scorer(
    const AdapterSpec& spec, const TemplateRegistry& templates);

/// Judge over a cmd or http transport. decompose expects a JSON array of
/// {"question","category"} entries; verify expects {"gold": [{"question",
/// "gold","reason"}, ...]} with one entry per principle, in order.
std::unique_ptr<JudgeClient> make_transport_judge(
    const AdapterSpec& spec, const TemplateRegistry& templates);

}  // namespace prefforge

#endif  // PREFFORGE_ADAPTERS_HPP_
