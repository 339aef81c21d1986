#pragma once

#include <fstream>
#include <json.hpp>
#include <string>

#include "ember/forest.hpp"

namespace ember {

namespace detail {

using nlohmann::json;

inline json to_json(const VariogramModel& model) {
  json structures = json::array();
  for (const auto& st : model.structures) {
    structures.push_back({{"shape", to_string(st.shape)},
                          {"sill", st.sill},
                          {"ranges", st.ranges},
                          {"angles", st.angles}});
  }
  return {{"nugget", model.nugget}, {"structures", structures}};
}

inline VariogramModel variogram_from_json(const json& j) {
  VariogramModel model;
  model.nugget = j.at("nugget").get<double>();
  for (const auto& js : j.at("structures")) {
    VariogramStructure st;
    st.shape = variogram_shape_from_string(js.at("shape").get<std::string>());
    st.sill = js.at("sill").get<double>();
    st.ranges = js.at("ranges").get<std::array<double, 3>>();
    st.angles = js.at("angles").get<std::array<double, 3>>();
    model.structures.push_back(st);
  }
  model.validate();
  return model;
}

inline json to_json(const KrigingSpec& spec) {
  json j{{"kind", to_string(spec.kind)},
         {"variogram", to_json(spec.variogram)},
         {"max_neighbors", spec.search.max_neighbors}};
  if (spec.mean) j["mean"] = *spec.mean;
  if (std::isfinite(spec.search.max_radius)) j["max_radius"] = spec.search.max_radius;
  return j;
}

inline KrigingSpec kriging_spec_from_json(const json& j) {
  KrigingSpec spec;
  spec.kind = kriging_kind_from_string(j.at("kind").get<std::string>());
  spec.variogram = variogram_from_json(j.at("variogram"));
  spec.search.max_neighbors = j.at("max_neighbors").get<std::size_t>();
  if (j.contains("max_radius")) spec.search.max_radius = j.at("max_radius").get<double>();
  if (j.contains("mean")) spec.mean = j.at("mean").get<double>();
  spec.validate();
  return spec;
}

}  // namespace detail

inline void save_model(const EmberModel& model, const std::string& path) {
  using nlohmann::json;
  json j;
  j["format"] = "ember-model";
  j["version"] = 1;

  const ForestParams& p = model.params();
  json embedded = json::array();
  for (const auto& spec : p.embedded) embedded.push_back(detail::to_json(spec));
  j["params"] = {{"n_trees", p.n_trees},
                 {"mtry", p.mtry},
                 {"min_node_size", p.min_node_size},
                 {"subsample_fraction", p.subsample_fraction},
                 {"bootstrap", p.bootstrap},
                 {"seed", p.seed},
                 {"embedded", embedded}};
  j["feature_names"] = model.feature_names();
  j["p_data"] = model.p_data();
  j["targets"] = model.targets();

  json sx = json::array(), sy = json::array(), sz = json::array(), sv = json::array(),
       sw = json::array();
  for (const auto& s : model.training_samples().records()) {
    sx.push_back(s.loc.x);
    sy.push_back(s.loc.y);
    sz.push_back(s.loc.z);
    sv.push_back(s.value);
    sw.push_back(s.well);
  }
  j["samples"] = {{"x", sx}, {"y", sy}, {"z", sz}, {"value", sv}, {"well", sw}};

  json trees = json::array();
  for (const auto& tree : model.trees()) {
    json nodes = json::array();
    for (const auto& nd : tree.nodes) {
      nodes.push_back({nd.var, nd.threshold, nd.left, nd.right, nd.begin, nd.end});
    }
    trees.push_back({{"inbag", tree.inbag},
                     {"leaf_slots", tree.leaf_slots},
                     {"embedded", tree.embedded},
                     {"nodes", nodes}});
  }
  j["trees"] = std::move(trees);

  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  out << j.dump();
}

inline EmberModel load_model(const std::string& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw DataError("model file '" + path + "' is not valid JSON: " + err.what());
  }
  try {
    if (j.at("format").get<std::string>() != "ember-model") {
      throw DataError("model file '" + path + "' has an unexpected format tag");
    }
    if (j.at("version").get<int>() != 1) {
      throw DataError("model file '" + path + "' has unsupported version " +
                      std::to_string(j.at("version").get<int>()));
    }

    ForestParams p;
    const json& jp = j.at("params");
    p.n_trees = jp.at("n_trees").get<std::size_t>();
    p.mtry = jp.at("mtry").get<std::size_t>();
    p.min_node_size = jp.at("min_node_size").get<std::size_t>();
    p.subsample_fraction = jp.at("subsample_fraction").get<double>();
    p.bootstrap = jp.at("bootstrap").get<bool>();
    p.seed = jp.at("seed").get<std::uint64_t>();
    for (const auto& je : jp.at("embedded")) {
      p.embedded.push_back(detail::kriging_spec_from_json(je));
    }

    auto feature_names = j.at("feature_names").get<std::vector<std::string>>();
    const auto p_data = j.at("p_data").get<std::size_t>();
    auto targets = j.at("targets").get<std::vector<double>>();

    const json& js = j.at("samples");
    const auto xs = js.at("x").get<std::vector<double>>();
    const auto ys = js.at("y").get<std::vector<double>>();
    const auto zs = js.at("z").get<std::vector<double>>();
    const auto vs = js.at("value").get<std::vector<double>>();
    const auto ws = js.at("well").get<std::vector<std::string>>();
    SampleSet samples;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      samples.add({Location{xs[i], ys[i], zs[i], std::nullopt}, vs[i], ws[i]});
    }

    std::vector<Tree> trees;
    for (const auto& jt : j.at("trees")) {
      Tree tree;
      tree.inbag = jt.at("inbag").get<std::vector<std::uint32_t>>();
      tree.leaf_slots = jt.at("leaf_slots").get<std::vector<std::uint32_t>>();
      tree.embedded = jt.at("embedded").get<std::vector<std::vector<double>>>();
      for (const auto& jn : jt.at("nodes")) {
        TreeNode nd;
        nd.var = jn.at(0).get<std::int32_t>();
        nd.threshold = jn.at(1).get<double>();
        nd.left = jn.at(2).get<std::int32_t>();
        nd.right = jn.at(3).get<std::int32_t>();
        nd.begin = jn.at(4).get<std::uint32_t>();
        nd.end = jn.at(5).get<std::uint32_t>();
        tree.nodes.push_back(nd);
      }
      trees.push_back(std::move(tree));
    }

    return EmberModel::assemble(std::move(p), std::move(feature_names), p_data,
                                std::move(targets), std::move(samples), std::move(trees));
  } catch (const json::exception& err) {
    throw DataError("model file '" + path + "' is missing fields: " + err.what());
  }
}

}  // namespace ember
