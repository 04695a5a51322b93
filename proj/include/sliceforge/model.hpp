#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sliceforge/error.hpp"
#include "sliceforge/loss.hpp"
#include "sliceforge/matrix.hpp"

namespace sliceforge {

/// Unit tag of a capacity ("rate_mbps", "mflops", ...). Compared exactly.
struct CapacityType {
  std::string label;
  friend bool operator==(const CapacityType&, const CapacityType&) = default;
};

struct PhysicalEntity {
  std::string id;
  CapacityType ctype;
  double capacity = 0.0;
  friend bool operator==(const PhysicalEntity&, const PhysicalEntity&) = default;
};

struct LogicalEntity {
  std::string id;
  std::vector<std::string> members;
  LossSpec loss;
  friend bool operator==(const LogicalEntity&, const LogicalEntity&) = default;
};

struct Flow {
  std::string id;
  double offered = 0.0;
  /// Capacity units per unit of flow, keyed by logical-entity id. Missing
  /// keys mean the flow does not use that entity.
  std::map<std::string, int> demands;
  friend bool operator==(const Flow&, const Flow&) = default;
};

/// Logical capacities C, indexed like NetworkModel::logicals().
struct CapacityAllocation {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  friend bool operator==(const CapacityAllocation&,
                         const CapacityAllocation&) = default;
};

/// Validated, immutable network description. All vectors and matrices use
/// the order in which entities were given.
class NetworkModel {
 public:
  NetworkModel(std::vector<PhysicalEntity> physicals,
               std::vector<LogicalEntity> logicals, std::vector<Flow> flows)
      : physicals_(std::move(physicals)),
        logicals_(std::move(logicals)),
        flows_(std::move(flows)) {
    validate_and_index();
  }

  const std::vector<PhysicalEntity>& physicals() const { return physicals_; }
  const std::vector<LogicalEntity>& logicals() const { return logicals_; }
  const std::vector<Flow>& flows() const { return flows_; }

  std::size_t physical_count() const { return physicals_.size(); }
  std::size_t logical_count() const { return logicals_.size(); }
  std::size_t flow_count() const { return flows_.size(); }

  /// A_{jr}: capacity units flow r needs on logical entity j (0 if unused).
  int demand(std::size_t logical, std::size_t flow) const {
    return demand_(logical, flow);
  }
  const Dense<int>& demand_matrix() const { return demand_; }

  /// m x n incidence: entry (i, k) is 1 iff physical k belongs to logical i.
  const Dense<int>& incidence() const { return incidence_; }

  const LossSpec& loss_of(std::size_t logical) const {
    return logicals_[logical].loss;
  }

  std::vector<double> physical_capacities() const {
    std::vector<double> caps;
    caps.reserve(physicals_.size());
    for (const auto& p : physicals_) caps.push_back(p.capacity);
    return caps;
  }

  /// Sum of A_{jr} over j: capacity units one unit of flow r occupies.
  int route_length(std::size_t flow) const {
    int total = 0;
    for (std::size_t j = 0; j < logical_count(); ++j) total += demand_(j, flow);
    return total;
  }

  std::optional<std::size_t> logical_index(std::string_view id) const {
    auto it = logical_index_.find(std::string(id));
    if (it == logical_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> physical_index(std::string_view id) const {
    auto it = physical_index_.find(std::string(id));
    if (it == physical_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Same logical entities and flows over replacement physical capacities.
  NetworkModel with_physical_capacities(std::span<const double> caps) const {
    if (caps.size() != physicals_.size()) {
      throw DimensionError("with_physical_capacities: expected " +
                           std::to_string(physicals_.size()) + " values");
    }
    auto physicals = physicals_;
    for (std::size_t k = 0; k < caps.size(); ++k) physicals[k].capacity = caps[k];
    return NetworkModel(std::move(physicals), logicals_, flows_);
  }

  friend bool operator==(const NetworkModel& a, const NetworkModel& b) {
    return a.physicals_ == b.physicals_ && a.logicals_ == b.logicals_ &&
           a.flows_ == b.flows_;
  }

 private:
  void validate_and_index() {
    for (std::size_t k = 0; k < physicals_.size(); ++k) {
      const auto& p = physicals_[k];
      if (p.id.empty()) throw ValidationError("physical entity with empty id");
      if (p.ctype.label.empty()) {
        throw ValidationError("physical '" + p.id + "': empty capacity type");
      }
      if (!std::isfinite(p.capacity) || p.capacity < 0.0) {
        throw ValidationError("physical '" + p.id +
                              "': capacity must be finite and >= 0");
      }
      if (!physical_index_.emplace(p.id, k).second) {
        throw ValidationError("duplicate physical id '" + p.id + "'");
      }
    }

    incidence_ = Dense<int>(logicals_.size(), physicals_.size(), 0);
    for (std::size_t i = 0; i < logicals_.size(); ++i) {
      const auto& l = logicals_[i];
      if (l.id.empty()) throw ValidationError("logical entity with empty id");
      if (!logical_index_.emplace(l.id, i).second) {
        throw ValidationError("duplicate logical id '" + l.id + "'");
      }
      if (l.members.empty()) {
        throw ValidationError("logical '" + l.id + "': empty member set");
      }
      const CapacityType* ctype = nullptr;
      for (const auto& member : l.members) {
        auto it = physical_index_.find(member);
        if (it == physical_index_.end()) {
          throw ValidationError("logical '" + l.id +
                                "' references unknown physical '" + member + "'");
        }
        if (incidence_(i, it->second) != 0) {
          throw ValidationError("logical '" + l.id + "': physical '" + member +
                                "' listed twice");
        }
        incidence_(i, it->second) = 1;
        const auto& t = physicals_[it->second].ctype;
        if (ctype == nullptr) {
          ctype = &t;
        } else if (!(*ctype == t)) {
          throw ValidationError("logical '" + l.id +
                                "': mixed capacity types ('" + ctype->label +
                                "' vs '" + t.label + "')");
        }
      }
    }

    demand_ = Dense<int>(logicals_.size(), flows_.size(), 0);
    std::set<std::string> flow_ids;
    for (std::size_t r = 0; r < flows_.size(); ++r) {
      const auto& f = flows_[r];
      if (f.id.empty()) throw ValidationError("flow with empty id");
      if (!flow_ids.insert(f.id).second) {
        throw ValidationError("duplicate flow id '" + f.id + "'");
      }
      if (!std::isfinite(f.offered) || f.offered < 0.0) {
        throw ValidationError("flow '" + f.id +
                              "': offered load must be finite and >= 0");
      }
      if (f.demands.empty()) {
        throw ValidationError("flow '" + f.id + "': empty demand map");
      }
      for (const auto& [logical, units] : f.demands) {
        auto it = logical_index_.find(logical);
        if (it == logical_index_.end()) {
          throw ValidationError("flow '" + f.id +
                                "' references unknown logical '" + logical + "'");
        }
        if (units <= 0) {
          throw ValidationError("flow '" + f.id + "': demand on '" + logical +
                                "' must be a positive integer");
        }
        demand_(it->second, r) = units;
      }
    }
  }

  std::vector<PhysicalEntity> physicals_;
  std::vector<LogicalEntity> logicals_;
  std::vector<Flow> flows_;
  std::unordered_map<std::string, std::size_t> physical_index_;
  std::unordered_map<std::string, std::size_t> logical_index_;
  Dense<int> incidence_;
  Dense<int> demand_;
};

/// Incidence matrix S (m x n, 0-1).
inline const Dense<int>& incidence(const NetworkModel& model) {
  return model.incidence();
}

/// Capacity consumed on each physical entity: sum of C_i over the logical
/// entities that contain it.
inline std::vector<double> physical_load(const NetworkModel& model,
                                         std::span<const double> alloc) {
  if (alloc.size() != model.logical_count()) {
    throw DimensionError("allocation has " + std::to_string(alloc.size()) +
                         " entries, model has " +
                         std::to_string(model.logical_count()) +
                         " logical entities");
  }
  const auto& s = model.incidence();
  std::vector<double> load(model.physical_count(), 0.0);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t k = 0; k < s.cols(); ++k) {
      if (s(i, k) != 0) load[k] += alloc[i];
    }
  }
  return load;
}

struct FeasibilityReport {
  bool ok = true;
  /// C_phys,k minus the capacity consumed on physical k.
  std::vector<double> slack;
  /// Largest violation over capacity rows and nonnegativity (0 if none).
  double max_violation = 0.0;
};

/// 1e-9 * (1 + max physical capacity).
inline double default_feasibility_tol(const NetworkModel& model) {
  double biggest = 0.0;
  for (const auto& p : model.physicals()) biggest = std::max(biggest, p.capacity);
  return 1e-9 * (1.0 + biggest);
}

inline FeasibilityReport check_feasible(const NetworkModel& model,
                                        const CapacityAllocation& alloc,
                                        std::optional<double> tol = {}) {
  const double eps = tol.value_or(default_feasibility_tol(model));
  const auto load = physical_load(model, alloc.values);
  FeasibilityReport report;
  report.slack.resize(load.size());
  for (std::size_t k = 0; k < load.size(); ++k) {
    report.slack[k] = model.physicals()[k].capacity - load[k];
    report.max_violation = std::max(report.max_violation, -report.slack[k]);
  }
  for (double c : alloc.values) report.max_violation = std::max(report.max_violation, -c);
  report.ok = report.max_violation <= eps;
  return report;
}

// ---------------------------------------------------------------------------
// JSON interchange

enum class ParseMode { strict, lenient };

namespace detail {

using Json = nlohmann::json;

inline void reject_unknown_keys(const Json& obj,
                                std::initializer_list<std::string_view> known,
                                const std::string& where, ParseMode mode) {
  if (mode == ParseMode::lenient) return;
  for (const auto& item : obj.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw ValidationError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

inline const Json& require(const Json& obj, const char* key,
                           const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(where + ": missing key '" + key + "'");
  }
  return *it;
}

inline std::string require_string(const Json& obj, const char* key,
                                  const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

inline double require_number(const Json& obj, const char* key,
                             const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_number()) throw ParseError(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

inline const Json& require_array(const Json& obj, const char* key,
                                 const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_array()) throw ParseError(where + ": '" + key + "' must be an array");
  return v;
}

inline std::string entry_label(const Json& item, const char* kind,
                               std::size_t index) {
  if (item.is_object()) {
    auto it = item.find("id");
    if (it != item.end() && it->is_string()) {
      return std::string(kind) + " '" + it->get<std::string>() + "'";
    }
  }
  return std::string(kind) + " #" + std::to_string(index);
}

}  // namespace detail

/// Parses and validates a model document.
///
/// Throws ParseError for malformed JSON or wrongly typed values and
/// ValidationError for rule violations (duplicate ids, dangling references,
/// mixed capacity types, non-integer demands, negative values, empty sets,
/// and unknown keys unless mode is lenient).
inline NetworkModel load_model(std::string_view text,
                               ParseMode mode = ParseMode::strict) {
  using detail::Json;
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("model document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("model document must be a JSON object");
  detail::reject_unknown_keys(doc, {"physical", "logical", "flows"}, "model",
                              mode);

  std::vector<PhysicalEntity> physicals;
  const Json& phys = detail::require_array(doc, "physical", "model");
  for (std::size_t k = 0; k < phys.size(); ++k) {
    const Json& p = phys[k];
    const auto where = detail::entry_label(p, "physical", k);
    if (!p.is_object()) throw ParseError(where + ": must be an object");
    detail::reject_unknown_keys(p, {"id", "ctype", "capacity"}, where, mode);
    physicals.push_back({detail::require_string(p, "id", where),
                         {detail::require_string(p, "ctype", where)},
                         detail::require_number(p, "capacity", where)});
  }

  std::vector<LogicalEntity> logicals;
  const Json& logi = detail::require_array(doc, "logical", "model");
  for (std::size_t i = 0; i < logi.size(); ++i) {
    const Json& l = logi[i];
    const auto where = detail::entry_label(l, "logical", i);
    if (!l.is_object()) throw ParseError(where + ": must be an object");
    detail::reject_unknown_keys(l, {"id", "members", "loss"}, where, mode);
    LogicalEntity entity;
    entity.id = detail::require_string(l, "id", where);
    for (const Json& m : detail::require_array(l, "members", where)) {
      if (!m.is_string()) throw ParseError(where + ": members must be strings");
      entity.members.push_back(m.get<std::string>());
    }
    const Json& loss = detail::require(l, "loss", where);
    if (!loss.is_object()) throw ParseError(where + ": 'loss' must be an object");
    detail::reject_unknown_keys(loss, {"kind"}, where + " loss", mode);
    try {
      entity.loss = LossSpec::from_name(detail::require_string(loss, "kind", where));
    } catch (const DomainError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    logicals.push_back(std::move(entity));
  }

  std::vector<Flow> flows;
  const Json& fl = detail::require_array(doc, "flows", "model");
  for (std::size_t r = 0; r < fl.size(); ++r) {
    const Json& f = fl[r];
    const auto where = detail::entry_label(f, "flow", r);
    if (!f.is_object()) throw ParseError(where + ": must be an object");
    detail::reject_unknown_keys(f, {"id", "offered", "demands"}, where, mode);
    Flow flow;
    flow.id = detail::require_string(f, "id", where);
    flow.offered = detail::require_number(f, "offered", where);
    const Json& demands = detail::require(f, "demands", where);
    if (!demands.is_object()) {
      throw ParseError(where + ": 'demands' must be an object");
    }
    for (const auto& item : demands.items()) {
      if (!item.value().is_number()) {
        throw ParseError(where + ": demand on '" + item.key() + "' must be a number");
      }
      const double units = item.value().get<double>();
      if (units != std::floor(units) || !std::isfinite(units)) {
        throw ValidationError(where + ": non-integer demand " +
                              item.value().dump() + " on logical '" +
                              item.key() + "'");
      }
      if (units <= 0.0 || units > 1e9) {
        throw ValidationError(where + ": demand on '" + item.key() +
                              "' must be a positive integer");
      }
      flow.demands.emplace(item.key(), static_cast<int>(units));
    }
    flows.push_back(std::move(flow));
  }

  return NetworkModel(std::move(physicals), std::move(logicals), std::move(flows));
}

/// Model as a JSON value in the interchange schema.
inline nlohmann::json model_to_json(const NetworkModel& model) {
  using detail::Json;
  Json doc = Json::object();
  doc["physical"] = Json::array();
  for (const auto& p : model.physicals()) {
    doc["physical"].push_back(
        {{"id", p.id}, {"ctype", p.ctype.label}, {"capacity", p.capacity}});
  }
  doc["logical"] = Json::array();
  for (const auto& l : model.logicals()) {
    doc["logical"].push_back({{"id", l.id},
                              {"members", l.members},
                              {"loss", {{"kind", std::string(l.loss.name())}}}});
  }
  doc["flows"] = Json::array();
  for (const auto& f : model.flows()) {
    Json demands = Json::object();
    for (const auto& [id, units] : f.demands) demands[id] = units;
    doc["flows"].push_back({{"id", f.id}, {"offered", f.offered}, {"demands", demands}});
  }
  return doc;
}

inline std::string serialize_model(const NetworkModel& model) {
  return model_to_json(model).dump(2);
}

}  // namespace sliceforge
