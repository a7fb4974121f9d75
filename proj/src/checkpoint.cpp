#include "spherad/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spherad/error.hpp"
#include "spherad/number.hpp"

namespace spherad {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "spherad-checkpoint";

json tensor_to_json(const Tensor& t) {
  json data = json::array();
  for (double v : t.v) data.push_back(repr_double(v));
  return json{{"rows", t.rows}, {"cols", t.cols}, {"data", std::move(data)}};
}

Tensor tensor_from_json(const json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") ||
      !j.contains("data")) {
    throw DataError("checkpoint parameter " + name + " is malformed");
  }
  const int rows = j.at("rows").get<int>();
  const int cols = j.at("cols").get<int>();
  const auto& data = j.at("data");
  if (rows < 1 || cols < 1 || !data.is_array() ||
      static_cast<int>(data.size()) != rows * cols) {
    throw DataError("checkpoint parameter " + name +
                    " has inconsistent shape");
  }
  Tensor t(rows, cols);
  for (int i = 0; i < rows * cols; ++i) {
    t.v[i] =
        parse_double(data[i].get<std::string>(), "checkpoint parameter " + name);
  }
  return t;
}

template <class Net>
json params_to_json(const Net& net) {
  const auto names = Net::param_names();
  const auto params = net.params();
  json out = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    out[names[i]] = tensor_to_json(*params[i]);
  }
  return out;
}

template <class Net>
void params_from_json(Net& net, const json& j) {
  const auto names = Net::param_names();
  const auto params = net.params();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!j.contains(names[i])) {
      throw DataError("checkpoint is missing parameter " + names[i]);
    }
    const Tensor loaded = tensor_from_json(j.at(names[i]), names[i]);
    Tensor& slot = *params[i];
    if (loaded.rows != slot.rows || loaded.cols != slot.cols) {
      throw DataError("checkpoint parameter " + names[i] + " has shape " +
                      std::to_string(loaded.rows) + "x" +
                      std::to_string(loaded.cols) + ", expected " +
                      std::to_string(slot.rows) + "x" +
                      std::to_string(slot.cols));
    }
    slot = loaded;
  }
}

// Shape skeletons filled with zeros; the stored arrays overwrite them.
GaeModel model_skeleton(int feat, int hidden, int latent, double kappa) {
  if (feat < 1 || hidden < 1 || latent < 2) {
    throw DataError("checkpoint model dimensions are invalid");
  }
  GaeModel m;
  m.feat_dim = feat;
  m.hidden_dim = hidden;
  m.latent_dim = latent;
  m.kappa = kappa;
  m.enc1.h0 = Tensor(feat, hidden);
  m.enc1.h1 = Tensor(feat, hidden);
  m.enc1.h2 = Tensor(feat, hidden);
  m.enc1.bias = Tensor(1, hidden);
  m.enc2.h0 = Tensor(hidden, latent);
  m.enc2.h1 = Tensor(hidden, latent);
  m.enc2.h2 = Tensor(hidden, latent);
  m.enc2.bias = Tensor(1, latent);
  m.dec_u = Tensor(latent, latent);
  m.dec_bias = Tensor(1, 1);
  return m;
}

Discriminator disc_skeleton(int feat, int filter, int hidden) {
  if (feat < 1 || filter < 1 || hidden < 1) {
    throw DataError("checkpoint critic dimensions are invalid");
  }
  Discriminator d;
  d.feat_dim = feat;
  d.filter_dim = filter;
  d.hidden_dim = hidden;
  d.filt.h0 = Tensor(feat, filter);
  d.filt.h1 = Tensor(feat, filter);
  d.filt.h2 = Tensor(feat, filter);
  d.filt.bias = Tensor(1, filter);
  d.w1 = Tensor(filter, hidden);
  d.b1 = Tensor(1, hidden);
  d.w2 = Tensor(hidden, 1);
  d.b2 = Tensor(1, 1);
  return d;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  json doc;
  doc["format"] = kFormatName;
  doc["format_version"] = ck.format_version;
  doc["config"] = json::parse(run_config_json(ck.config));
  doc["epoch"] = ck.epoch;
  doc["rng_state"] = ck.rng_state;

  json model;
  model["feat_dim"] = ck.model.feat_dim;
  model["hidden_dim"] = ck.model.hidden_dim;
  model["latent_dim"] = ck.model.latent_dim;
  model["kappa"] = repr_double(ck.model.kappa);
  model["params"] = params_to_json(ck.model);
  doc["model"] = std::move(model);

  if (ck.has_disc) {
    json disc;
    disc["feat_dim"] = ck.disc.feat_dim;
    disc["filter_dim"] = ck.disc.filter_dim;
    disc["hidden_dim"] = ck.disc.hidden_dim;
    disc["params"] = params_to_json(ck.disc);
    doc["discriminator"] = std::move(disc);
  } else {
    doc["discriminator"] = nullptr;
  }

  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << doc.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
  }

  try {
    if (!doc.is_object() || doc.value("format", "") != kFormatName) {
      throw DataError("file " + path + " is not a checkpoint");
    }
    Checkpoint ck;
    ck.format_version = doc.at("format_version").get<int>();
    if (ck.format_version != kFormatVersion) {
      throw DataError("checkpoint format version " +
                      std::to_string(ck.format_version) + " not supported");
    }
    ck.config = parse_run_config(doc.at("config").dump(), "checkpoint config");
    ck.epoch = doc.at("epoch").get<int>();
    ck.rng_state = doc.at("rng_state").get<std::string>();

    const json& jm = doc.at("model");
    ck.model = model_skeleton(jm.at("feat_dim").get<int>(),
                              jm.at("hidden_dim").get<int>(),
                              jm.at("latent_dim").get<int>(),
                              parse_double(jm.at("kappa").get<std::string>(),
                                           "checkpoint kappa"));
    params_from_json(ck.model, jm.at("params"));
    validate_model(ck.model);

    const json& jd = doc.at("discriminator");
    if (!jd.is_null()) {
      ck.has_disc = true;
      ck.disc = disc_skeleton(jd.at("feat_dim").get<int>(),
                              jd.at("filter_dim").get<int>(),
                              jd.at("hidden_dim").get<int>());
      params_from_json(ck.disc, jd.at("params"));
      validate_discriminator(ck.disc);
    }
    return ck;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + " is malformed: " + e.what());
  }
}

}  // namespace spherad
