#include "radwatch/model_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "radwatch/error.hpp"

namespace radwatch {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

ordered_json numbers(const std::vector<double>& v) {
  ordered_json arr = ordered_json::array();
  for (double x : v) arr.push_back(encode_number(x));
  return arr;
}

std::vector<double> numbers_from(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::Format, "expected numeric array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(decode_number(e));
  return out;
}

const json& field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::Format, std::string("model file missing field ") + key);
  return j.at(key);
}

std::size_t count_from(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_unsigned()) throw Error(ErrorCode::Format, std::string(key) + " must be a count");
  return v.get<std::size_t>();
}

}  // namespace

std::string encode_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double decode_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) throw Error(ErrorCode::Format, "expected number or numeric string");
  const auto& s = j.get_ref<const std::string&>();
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(ErrorCode::Format, "bad numeric string '" + s + "'");
  return v;
}

ordered_json model_to_json(const ModelBundle& bundle) {
  ordered_json j;
  j["format"] = "radwatch-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = std::string(detector_name(kind_of(bundle.model)));
  ordered_json hyper;
  ordered_json payload;
  std::visit(overloaded{
                 [&](const OcsvmModel& m) {
                   hyper["nu"] = encode_number(m.nu);
                   hyper["gamma"] = encode_number(m.gamma);
                   hyper["tol"] = encode_number(m.tol);
                   hyper["max_iter"] = m.max_iter;
                   payload["dim"] = m.support_vectors.dim;
                   payload["train_size"] = m.train_size;
                   payload["offset"] = encode_number(m.offset);
                   payload["alphas"] = numbers(m.alphas);
                   payload["support_vectors"] = numbers(m.support_vectors.values);
                   payload["converged"] = m.converged;
                   payload["iterations"] = m.iterations;
                   payload["objective"] = encode_number(m.objective);
                 },
                 [&](const EllipticEnvelopeModel& m) {
                   hyper["contamination"] = encode_number(m.contamination);
                   hyper["h"] = m.h;
                   payload["dim"] = m.dim();
                   payload["mu"] = numbers(m.mu);
                   payload["cov"] = numbers(m.cov);
                   payload["cov_inv"] = numbers(m.cov_inv);
                   payload["threshold"] = encode_number(m.threshold);
                 },
                 [&](const LofModel& m) {
                   hyper["k"] = m.k;
                   hyper["threshold"] = encode_number(m.threshold);
                   payload["dim"] = m.reference.dim;
                   payload["reference"] = numbers(m.reference.values);
                   payload["k_distances"] = numbers(m.k_distances);
                   payload["lrd"] = numbers(m.lrd);
                 },
                 [&](const ControlChartModel& m) {
                   hyper["k_sigma"] = encode_number(m.k_sigma);
                   payload["mean"] = numbers(m.mean);
                   payload["stddev"] = numbers(m.stddev);
                   payload["ucl"] = numbers(m.ucl);
                   payload["lcl"] = numbers(m.lcl);
                 },
             },
             bundle.model);
  j["hyperparameters"] = std::move(hyper);
  j["payload"] = std::move(payload);
  j["feature_names"] = bundle.feature_names;
  if (bundle.scaler) {
    j["scaler"] = {{"mean", numbers(bundle.scaler->mean)}, {"stddev", numbers(bundle.scaler->stddev)}};
  } else {
    j["scaler"] = nullptr;
  }
  return j;
}

ModelBundle model_from_json(const json& j) {
  try {
    if (field(j, "format") != "radwatch-model") throw Error(ErrorCode::Format, "not a radwatch model file");
    if (field(j, "version").get<int>() != kModelFormatVersion)
      throw Error(ErrorCode::Format, "unsupported model format version");
    const auto kind = detector_from_name(field(j, "kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::Format, "unknown model kind");
    const json& hyper = field(j, "hyperparameters");
    const json& p = field(j, "payload");
    ModelBundle b;
    switch (*kind) {
      case DetectorKind::Ocsvm: {
        OcsvmModel m;
        m.nu = decode_number(field(hyper, "nu"));
        m.gamma = decode_number(field(hyper, "gamma"));
        m.tol = decode_number(field(hyper, "tol"));
        m.max_iter = count_from(hyper, "max_iter");
        m.support_vectors.dim = count_from(p, "dim");
        m.support_vectors.values = numbers_from(field(p, "support_vectors"));
        m.alphas = numbers_from(field(p, "alphas"));
        m.offset = decode_number(field(p, "offset"));
        m.train_size = count_from(p, "train_size");
        m.converged = field(p, "converged").get<bool>();
        m.iterations = count_from(p, "iterations");
        m.objective = decode_number(field(p, "objective"));
        if (m.support_vectors.dim == 0 || m.support_vectors.size() != m.alphas.size() ||
            m.support_vectors.values.size() != m.alphas.size() * m.support_vectors.dim)
          throw Error(ErrorCode::Format, "support vector payload has inconsistent shape");
        b.model = std::move(m);
        break;
      }
      case DetectorKind::Envelope: {
        auto mu = numbers_from(field(p, "mu"));
        auto cov = numbers_from(field(p, "cov"));
        auto cov_inv = numbers_from(field(p, "cov_inv"));
        const std::size_t d = mu.size();
        if (cov.size() != d * d || cov_inv.size() != d * d)
          throw Error(ErrorCode::Format, "envelope payload has inconsistent shape");
        EllipticEnvelopeModel m;
        m.mu = std::move(mu);
        m.cov = std::move(cov);
        m.cov_inv = std::move(cov_inv);
        m.threshold = decode_number(field(p, "threshold"));
        m.h = count_from(hyper, "h");
        m.contamination = decode_number(field(hyper, "contamination"));
        b.model = std::move(m);
        break;
      }
      case DetectorKind::Lof: {
        LofModel m;
        m.k = count_from(hyper, "k");
        m.threshold = decode_number(field(hyper, "threshold"));
        m.reference.dim = count_from(p, "dim");
        m.reference.values = numbers_from(field(p, "reference"));
        m.k_distances = numbers_from(field(p, "k_distances"));
        m.lrd = numbers_from(field(p, "lrd"));
        const std::size_t n = m.reference.size();
        if (m.reference.dim == 0 || m.reference.values.size() != n * m.reference.dim ||
            m.k_distances.size() != n || m.lrd.size() != n || m.k < 1 || m.k >= n)
          throw Error(ErrorCode::Format, "LOF payload has inconsistent shape");
        b.model = std::move(m);
        break;
      }
      case DetectorKind::ControlChart: {
        ControlChartModel m;
        m.k_sigma = decode_number(field(hyper, "k_sigma"));
        m.mean = numbers_from(field(p, "mean"));
        m.stddev = numbers_from(field(p, "stddev"));
        m.ucl = numbers_from(field(p, "ucl"));
        m.lcl = numbers_from(field(p, "lcl"));
        const std::size_t d = m.mean.size();
        if (m.stddev.size() != d || m.ucl.size() != d || m.lcl.size() != d)
          throw Error(ErrorCode::Format, "control chart payload has inconsistent shape");
        b.model = std::move(m);
        break;
      }
    }
    if (j.contains("feature_names")) b.feature_names = j["feature_names"].get<std::vector<std::string>>();
    if (j.contains("scaler") && !j["scaler"].is_null()) {
      Scaler s{numbers_from(field(j["scaler"], "mean")), numbers_from(field(j["scaler"], "stddev"))};
      if (s.mean.size() != s.stddev.size() || s.mean.size() != dimension_of(b.model))
        throw Error(ErrorCode::Format, "scaler width does not match model");
      b.scaler = std::move(s);
    }
    return b;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("model file: ") + e.what());
  }
}

std::string serialize_model(const ModelBundle& bundle) { return model_to_json(bundle).dump(1) + "\n"; }

ModelBundle parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Format, std::string("model file: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace radwatch
