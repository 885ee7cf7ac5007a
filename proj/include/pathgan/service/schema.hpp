#pragma once

// A small JSON-Schema subset (type, required, properties, items, enum,
// minimum, maximum, minItems, maxItems, additionalProperties=false), enough
// to pin the shape of every service response.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pathgan::service {

namespace detail {

inline bool type_matches(const nlohmann::json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
  if (t == "number") return v.is_number();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  return false;
}

inline void validate_into(const nlohmann::json& v, const nlohmann::json& s, const std::string& path,
                          std::vector<std::string>& errors) {
  if (s.contains("type")) {
    bool ok = false;
    if (s["type"].is_array()) {
      for (const auto& t : s["type"]) ok = ok || type_matches(v, t.get<std::string>());
    } else {
      ok = type_matches(v, s["type"].get<std::string>());
    }
    if (!ok) {
      errors.push_back(path + ": expected type " + s["type"].dump());
      return;
    }
  }
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s["enum"]) found = found || e == v;
    if (!found) errors.push_back(path + ": value not in enum");
  }
  if (v.is_number()) {
    if (s.contains("minimum") && v.get<double>() < s["minimum"].get<double>()) errors.push_back(path + ": below minimum");
    if (s.contains("maximum") && v.get<double>() > s["maximum"].get<double>()) errors.push_back(path + ": above maximum");
  }
  if (v.is_object()) {
    for (const auto& r : s.value("required", nlohmann::json::array()))
      if (!v.contains(r.get<std::string>())) errors.push_back(path + ": missing '" + r.get<std::string>() + "'");
    const auto props = s.value("properties", nlohmann::json::object());
    for (const auto& [k, sub] : v.items()) {
      if (props.contains(k)) validate_into(sub, props[k], path + "." + k, errors);
      else if (s.contains("additionalProperties") && s["additionalProperties"].is_boolean() && !s["additionalProperties"].get<bool>())
        errors.push_back(path + ": unexpected property '" + k + "'");
      else if (s.contains("additionalProperties") && s["additionalProperties"].is_object())
        validate_into(sub, s["additionalProperties"], path + "." + k, errors);
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) errors.push_back(path + ": too few items");
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) errors.push_back(path + ": too many items");
    if (s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) validate_into(v[i], s["items"], path + "[" + std::to_string(i) + "]", errors);
  }
}

} // namespace detail

/// Returns the list of violations; empty means valid.
inline std::vector<std::string> validate(const nlohmann::json& value, const nlohmann::json& schema) {
  std::vector<std::string> errors;
  detail::validate_into(value, schema, "$", errors);
  return errors;
}

/// Published response schemas, keyed by endpoint name.
inline const nlohmann::json& response_schemas() {
  static const nlohmann::json s = [] {
    using nlohmann::json;
    const json num = {{"type", "number"}};
    const json str = {{"type", "string"}};
    const json image = {{"type", "object"},
                        {"required", {"format", "width", "height", "data", "digest"}},
                        {"additionalProperties", false},
                        {"properties",
                         {{"format", {{"enum", {"png"}}}},
                          {"width", {{"type", "integer"}}},
                          {"height", {{"type", "integer"}}},
                          {"data", str},
                          {"digest", str}}}};
    const json wvec = {{"type", "array"}, {"items", num}};
    const json point = {{"type", "object"},
                        {"required", {"id", "label", "x", "y"}},
                        {"properties", {{"id", str}, {"label", str}, {"x", num}, {"y", num}, {"origin", str}, {"expression", str}}}};
    const json roc = {{"type", "object"},
                      {"required", {"auc", "curve", "positives", "negatives"}},
                      {"properties",
                       {{"auc", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}},
                        {"positives", {{"type", "integer"}}},
                        {"negatives", {{"type", "integer"}}},
                        {"curve",
                         {{"type", "array"},
                          {"items",
                           {{"type", "object"},
                            {"required", {"fpr", "tpr", "threshold"}},
                            {"properties", {{"fpr", num}, {"tpr", num}, {"threshold", num}}}}}}}}}};
    // Client-facing study item: deliberately no truth or selection mode.
    json study_item_props = {{"item_id", str},
                             {"index", {{"type", "integer"}, {"minimum", 0}, {"maximum", 49}}},
                             {"rated", {{"type", "boolean"}}},
                             {"rating", {{"type", {"integer", "null"}}, {"minimum", 1}, {"maximum", 5}}}};
    const json study_item = {{"type", "object"},
                             {"required", {"item_id", "index", "rated"}},
                             {"additionalProperties", false},
                             {"properties", study_item_props}};
    const json session = {{"type", "object"},
                          {"required", {"session_id", "status", "items", "next_unrated"}},
                          {"additionalProperties", false},
                          {"properties",
                           {{"session_id", str},
                            {"status", {{"enum", {"open", "complete"}}}},
                            {"next_unrated", {{"type", {"integer", "null"}}}},
                            {"items", {{"type", "array"}, {"minItems", 50}, {"maxItems", 50}, {"items", study_item}}}}}};
    return json{
        {"error",
         {{"type", "object"},
          {"required", {"error"}},
          {"properties", {{"error", {{"type", "object"}, {"required", {"code", "message"}}, {"properties", {{"code", str}, {"message", str}}}}}}}}},
        {"health",
         {{"type", "object"},
          {"required", {"status", "checkpoint_digest"}},
          {"properties", {{"status", {{"enum", {"ok"}}}}, {"checkpoint_digest", str}, {"atlas_points", {{"type", "integer"}}}}}}},
        {"generate",
         {{"type", "object"},
          {"required", {"image", "w"}},
          {"properties", {{"image", image}, {"w", wvec}, {"seed", {{"type", "integer"}}}}}}},
        {"interpolate",
         {{"type", "object"},
          {"required", {"steps"}},
          {"properties",
           {{"steps",
             {{"type", "array"},
              {"minItems", 2},
              {"items", {{"type", "object"}, {"required", {"t", "image", "w"}}, {"properties", {{"t", num}, {"image", image}, {"w", wvec}}}}}}}}}}},
        {"vecop",
         {{"type", "object"},
          {"required", {"expression", "w", "image", "point", "operands"}},
          {"properties",
           {{"expression", str}, {"w", wvec}, {"image", image}, {"point", point}, {"operands", {{"type", "array"}, {"items", point}}}}}}},
        {"atlas_points",
         {{"type", "object"},
          {"required", {"projector", "checkpoint_digest", "points"}},
          {"properties", {{"projector", str}, {"checkpoint_digest", str}, {"points", {{"type", "array"}, {"items", point}}}}}}},
        {"atlas_neighbors",
         {{"type", "object"},
          {"required", {"image", "neighbors"}},
          {"properties",
           {{"image", str},
            {"neighbors",
             {{"type", "array"},
              {"items",
               {{"type", "object"},
                {"required", {"id", "distance", "rank"}},
                {"properties", {{"id", str}, {"distance", num}, {"rank", {{"type", "integer"}}}, {"label", str}, {"image", image}}}}}}}}}}},
        {"study_session", session},
        {"study_item_image", {{"type", "object"}, {"required", {"item_id", "image"}}, {"additionalProperties", false}, {"properties", {{"item_id", str}, {"image", image}}}}},
        {"study_rate",
         {{"type", "object"},
          {"required", {"session_id", "item_id", "rating", "duplicate", "remaining"}},
          {"additionalProperties", false},
          {"properties",
           {{"session_id", str},
            {"item_id", str},
            {"rating", {{"type", "integer"}, {"minimum", 1}, {"maximum", 5}}},
            {"duplicate", {{"type", "boolean"}}},
            {"remaining", {{"type", "integer"}, {"minimum", 0}}}}}}},
        {"study_result",
         {{"type", "object"},
          {"required", {"session_id", "roc", "items"}},
          {"properties",
           {{"session_id", str},
            {"roc", roc},
            {"svg", str},
            {"items",
             {{"type", "array"},
              {"items",
               {{"type", "object"},
                {"required", {"item_id", "truth", "rating", "mode"}},
                {"properties",
                 {{"item_id", str},
                  {"truth", {{"enum", {"real", "generated"}}}},
                  {"mode", {{"enum", {"curated", "nearest-distance", "neighbor"}}}},
                  {"rating", {{"type", "integer"}}},
                  {"image_id", str}}}}}}}}}}},
        {"study_pooled",
         {{"type", "object"},
          {"required", {"sessions", "pooled"}},
          {"properties",
           {{"sessions", {{"type", "array"}, {"items", {{"type", "object"}, {"required", {"session_id", "auc"}}}}}},
            {"pooled", {{"type", {"object", "null"}}}}}}}},
    };
  }();
  return s;
}

} // namespace pathgan::service
