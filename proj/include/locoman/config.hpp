#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace locoman {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ConfigType { real, integer, boolean, text };

/// Flat typed key-value run configuration with dotted namespaces. Unknown
/// keys and type mismatches fail fast; values canonicalize on set so
/// parse -> serialize -> parse is the identity.
class RunConfig {
 public:
  RunConfig();  // full schema, default values

  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& key_eq_value);  // "key=value"

  double real(const std::string& key) const;
  long integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  /// Sorted "key = value" lines; '#' starts a comment when parsing.
  std::string serialize() const;
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;

  uint64_t hash() const;  // FNV-1a over the canonical serialization

  /// name, type, default, doc for every key (documentation + help output).
  struct KeySpec {
    std::string name;
    ConfigType type;
    std::string default_value;
    std::string doc;
  };
  static const std::vector<KeySpec>& schema();

 private:
  std::map<std::string, std::string> values_;  // canonicalized
};

inline constexpr const char* kCodeVersion = "locoman 1.0.0";

/// Run manifest written beside outputs: config hash, code version, seed,
/// command. A run is reproducible from its manifest plus the config file.
void write_manifest(const std::string& out_dir, const RunConfig& config, uint64_t seed,
                    const std::string& command);

}  // namespace locoman
