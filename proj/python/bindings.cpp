#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <sstream>

#include "ikrnet/cli.hpp"
#include "ikrnet/data/dataset.hpp"
#include "ikrnet/data/synthetic.hpp"
#include "ikrnet/errors.hpp"
#include "ikrnet/eval/report.hpp"
#include "ikrnet/model/ikrnet.hpp"
#include "ikrnet/nn/checkpoint.hpp"
#include "ikrnet/record_io.hpp"
#include "ikrnet/signal.hpp"
#include "ikrnet/types.hpp"

namespace py = pybind11;
using namespace ikrnet;
using json = nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Dicts cross the boundary as JSON text.
json to_json(const py::object& obj) {
    if (obj.is_none()) return json::object();
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object from_json(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

signal::EcgRecord make_record(const Array& samples, double fs) {
    if (samples.ndim() != 1) throw py::value_error("samples must be one-dimensional");
    signal::EcgRecord r;
    r.samples.assign(samples.data(), samples.data() + samples.size());
    r.fs = fs;
    r.source_fs = fs;
    return r;
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

model::IKrNetConfig config_from(const py::object& obj) {
    if (py::isinstance<py::str>(obj)) {
        const auto name = obj.cast<std::string>();
        if (name == "toy") return model::IKrNetConfig::toy();
        if (name == "desk") return model::IKrNetConfig::desk();
        if (name == "paper") return model::IKrNetConfig::paper();
        throw ConfigError("unknown preset '" + name + "' (expected toy, desk or paper)");
    }
    return model::IKrNetConfig::from_json(to_json(obj));
}

class PyModel {
public:
    PyModel(const py::object& config, std::uint64_t seed)
        : model_(model::IKrNetModel<float>::build(config_from(config), seed)) {}

    py::array_t<double> forward(const py::array_t<float, py::array::c_style | py::array::forcecast>& batch) {
        if (batch.ndim() != 2) throw py::value_error("batch must be [B, L]");
        const auto b = static_cast<std::size_t>(batch.shape(0));
        const auto l = static_cast<std::size_t>(batch.shape(1));
        std::vector<float> data(batch.data(), batch.data() + batch.size());
        std::vector<double> out;
        {
            py::gil_scoped_release release;
            nn::NoGradGuard guard;
            const auto s = model_.forward(nn::Tensor<float>::from({b, 1, l}, std::move(data)));
            out.assign(s.data().begin(), s.data().end());
        }
        return to_array(out);
    }

    std::size_t num_parameters() const { return model_.count_parameters(); }
    std::size_t min_input_length() const { return model_.min_input_length(); }
    py::object config() const { return from_json(model_.config().to_json()); }
    std::string config_hash() const { return model_.config().hash(); }

    void load_checkpoint(const std::string& path) {
        nn::load_checkpoint(path, model_.store(), model_.config().hash());
    }
    void save_checkpoint(const std::string& path) const {
        nn::save_checkpoint(path, model_.store(), model_.config().hash(), model_.config().to_json());
    }

private:
    model::IKrNetModel<float> model_;
};

}  // namespace

PYBIND11_MODULE(_ikrnet, m) {
    m.doc() = "Synthetic ECG drug-footprint pipeline, IKrNet model and robustness metrics";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<DegenerateSignal>(m, "DegenerateSignal", base.ptr());
    py::register_exception<InsufficientBeats>(m, "InsufficientBeats", base.ptr());
    py::register_exception<UndefinedRoc>(m, "UndefinedRoc", base.ptr());
    py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());

    m.def(
        "resample",
        [](const Array& samples, double fs, double target_fs) {
            return to_array(signal::resample(make_record(samples, fs), target_fs).samples);
        },
        py::arg("samples"), py::arg("fs"), py::arg("target_fs"), "Natural cubic spline resample to target_fs.");

    m.def(
        "standardize", [](const Array& samples) { return to_array(signal::standardize(make_record(samples, 1.0)).samples); },
        py::arg("samples"), "Per-record z-score.");

    m.def(
        "heart_rate",
        [](const Array& samples, double fs) {
            const auto rec = make_record(samples, fs);
            const auto windows = signal::detect_beat_windows(rec);
            py::dict out;
            if (windows.size() < 2) {
                out["peak_indices"] = std::vector<std::size_t>{};
                out["instantaneous_bpm"] = std::vector<double>{};
                out["average_bpm"] = std::numeric_limits<double>::quiet_NaN();
                return out;
            }
            const auto hr = signal::estimate_heart_rate(rec, windows);
            out["peak_indices"] = hr.peak_indices;
            out["instantaneous_bpm"] = hr.instantaneous_bpm;
            out["average_bpm"] = hr.average_bpm;
            return out;
        },
        py::arg("samples"), py::arg("fs"), "Detect beats and estimate the heart rate of one record.");

    m.def(
        "generate",
        [](const py::object& spec) {
            const auto s = data::SyntheticProtocolSpec::from_json(to_json(spec));
            data::GeneratedDataset ds;
            {
                py::gil_scoped_release release;
                ds = data::generate(s);
            }
            py::list records;
            for (const auto& sr : ds.records) {
                py::dict r;
                r["record_id"] = sr.record.record_id;
                r["patient_id"] = sr.record.patient_id;
                r["label"] = to_int(sr.record.label);
                r["zone"] = std::string(to_string(sr.record.zone));
                r["fs"] = sr.record.fs;
                r["samples"] = to_array(sr.record.samples);
                r["truth"] = from_json(sr.extra);
                records.append(r);
            }
            return py::make_tuple(from_json(ds.manifest.to_json()), records);
        },
        py::arg("spec") = py::none(), "Generate a synthetic protocol dataset: (manifest, records).");

    m.def("model_config", [](const py::object& preset) { return from_json(config_from(preset).to_json()); },
          py::arg("preset"), "Resolve a preset name or config dict to a full model config.");

    py::class_<PyModel>(m, "Model")
        .def(py::init<const py::object&, std::uint64_t>(), py::arg("config") = "toy", py::arg("seed") = 0)
        .def("forward", &PyModel::forward, py::arg("batch"), "Scores in [0,1] for a [B, L] batch (eval mode).")
        .def_property_readonly("num_parameters", &PyModel::num_parameters)
        .def_property_readonly("min_input_length", &PyModel::min_input_length)
        .def_property_readonly("config", &PyModel::config)
        .def_property_readonly("config_hash", &PyModel::config_hash)
        .def("load_checkpoint", &PyModel::load_checkpoint, py::arg("path"))
        .def("save_checkpoint", &PyModel::save_checkpoint, py::arg("path"));

    m.def(
        "evaluate",
        [](const py::object& predictions) {
            const auto preds = eval::predictions_from_json(to_json(predictions));
            return from_json(eval::to_json(eval::build_report(preds)));
        },
        py::arg("predictions"), "Full evaluation report for a list of prediction dicts.");

    m.def(
        "cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line tool in-process: (exit_code, stdout, stderr).");
}
