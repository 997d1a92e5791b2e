#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gcnlab/gcnlab.hpp"

namespace py = pybind11;
using namespace gcnlab;

namespace {

// Python sees node features as (N, C); the library stores them as C x N.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

GraphBundle make_graph(Index n, const py::array_t<std::int64_t, py::array::c_style>& edges,
                       const Matrix& features, std::vector<int> labels,
                       std::vector<Index> train, std::vector<Index> val, std::vector<Index> test,
                       int num_classes) {
  std::vector<Edge> e;
  if (edges.size() > 0) {
    if (edges.ndim() != 2 || edges.shape(1) != 2) {
      throw DimensionError("edges must have shape (E, 2)");
    }
    auto r = edges.unchecked<2>();
    for (py::ssize_t k = 0; k < r.shape(0); ++k) e.emplace_back(r(k, 0), r(k, 1));
  }
  return GraphBundle::from_edges(n, e, features.transpose(), std::move(labels),
                                 {std::move(train), std::move(val), std::move(test)},
                                 num_classes);
}

template <typename T>
T parse_or_throw(std::optional<T> v, const std::string& what, const std::string& name) {
  if (!v) throw ConfigError("unknown " + what + " '" + name + "'");
  return *v;
}

py::dict record_dict(const MetricsRecord& r) {
  return py::module_::import("json").attr("loads")(metrics_json_line(r));
}

}  // namespace

PYBIND11_MODULE(_gcnlab, m) {
  m.doc() = "Deep GCN training with isometric initialization and gradient-guided rewiring";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_OSError);

  py::class_<GraphBundle>(m, "Graph")
      .def(py::init(&make_graph), py::arg("num_nodes"), py::arg("edges"), py::arg("features"),
           py::arg("labels"), py::arg("train") = std::vector<Index>{},
           py::arg("val") = std::vector<Index>{}, py::arg("test") = std::vector<Index>{},
           py::arg("num_classes") = 0,
           "Undirected graph from an (E, 2) edge array and (N, C) node features.")
      .def_property_readonly("num_nodes", &GraphBundle::num_nodes)
      .def_property_readonly("num_features", &GraphBundle::num_features)
      .def_property_readonly("num_classes", &GraphBundle::num_classes)
      .def_property_readonly("num_undirected_edges", &GraphBundle::num_undirected_edges)
      .def_property_readonly("num_directed_edges", &GraphBundle::num_directed_edges)
      .def_property_readonly("degrees", &GraphBundle::degrees)
      .def_property_readonly("labels", &GraphBundle::labels)
      .def_property_readonly("features",
                             [](const GraphBundle& g) { return RowMatrix(g.features().transpose()); })
      .def_property_readonly("edges",
                             [](const GraphBundle& g) {
                               const auto list = g.edge_list();
                               py::array_t<std::int64_t> out(
                                   {static_cast<py::ssize_t>(list.size()), py::ssize_t{2}});
                               auto w = out.mutable_unchecked<2>();
                               for (std::size_t k = 0; k < list.size(); ++k) {
                                 w(k, 0) = list[k].first;
                                 w(k, 1) = list[k].second;
                               }
                               return out;
                             })
      .def_property_readonly("splits", [](const GraphBundle& g) {
        py::dict d;
        d["train"] = g.splits().train;
        d["val"] = g.splits().val;
        d["test"] = g.splits().test;
        return d;
      });

  m.def("propagation_matrix",
        [](const GraphBundle& g) { return build_propagation_operator(g).to_dense(); },
        "Dense D~^-1/2 (A + I) D~^-1/2.");
  m.def("propagation_csr", [](const GraphBundle& g) {
    const auto op = build_propagation_operator(g);
    return py::make_tuple(op.row_offsets(), op.col_indices(), op.values());
  });
  m.def("degree_sums", [](const GraphBundle& g) {
    const auto s = degree_sum_statistics(g);
    return py::make_tuple(s.s1, s.s2);
  });
  m.def("iso_magnitude", &iso_magnitude);
  m.def("iso_variance", &iso_variance, py::arg("graph"), py::arg("out_dim"));
  m.def("iso_uniform_bound", &iso_uniform_bound, py::arg("graph"), py::arg("out_dim"));
  m.def("glorot_bound", &glorot_bound, py::arg("in_dim"), py::arg("out_dim"));
  m.def(
      "init_weights",
      [](Index out, Index in, const std::string& scheme, const GraphBundle& g, std::uint64_t seed) {
        const InitKind kind = parse_or_throw(parse_init_kind(scheme), "init scheme", scheme);
        return initialize(out, in, InitScheme{kind, seed}, g);
      },
      py::arg("out_dim"), py::arg("in_dim"), py::arg("scheme"), py::arg("graph"),
      py::arg("seed") = 1, "Weight matrix of shape (out_dim, in_dim).");

  m.def(
      "dirichlet_energy",
      [](const Matrix& x, const GraphBundle& g) { return dirichlet_energy(x.transpose(), g); },
      py::arg("features"), py::arg("graph"), "Energy of (N, C) node features, edge-sum form.");
  m.def(
      "dirichlet_energy_trace",
      [](const Matrix& x, const GraphBundle& g) { return dirichlet_energy_trace(x.transpose(), g); },
      py::arg("features"), py::arg("graph"));
  m.def(
      "gradient_flow",
      [](const std::vector<Matrix>& grads, double p) {
        GradientSet g;
        g.weights = grads;
        const auto f = gradient_flow(g, p);
        return py::make_tuple(f.per_layer, f.mean_flow);
      },
      py::arg("grads"), py::arg("p") = 2.0);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("hidden_dim", &TrainConfig::hidden_dim)
      .def_readwrite("num_layers", &TrainConfig::num_layers)
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("p_threshold", &TrainConfig::p_threshold)
      .def_readwrite("dropout", &TrainConfig::dropout)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("eval_stride", &TrainConfig::eval_stride)
      .def_readwrite("energy_stride", &TrainConfig::energy_stride)
      .def_readwrite("flow_p", &TrainConfig::flow_p)
      .def_readwrite("bias", &TrainConfig::bias)
      .def_property(
          "init", [](const TrainConfig& c) { return std::string(to_string(c.init)); },
          [](TrainConfig& c, const std::string& s) {
            c.init = parse_or_throw(parse_init_kind(s), "init scheme", s);
          })
      .def_property(
          "skip_mode", [](const TrainConfig& c) { return std::string(to_string(c.skip_mode)); },
          [](TrainConfig& c, const std::string& s) {
            c.skip_mode = parse_or_throw(parse_skip_mode(s), "skip mode", s);
          })
      .def_property(
          "skip_source", [](const TrainConfig& c) { return std::string(to_string(c.skip_source)); },
          [](TrainConfig& c, const std::string& s) {
            c.skip_source = parse_or_throw(parse_skip_source(s), "skip source", s);
          })
      .def("validate", &TrainConfig::validate);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("best_val_epoch", &TrainResult::best_val_epoch)
      .def_readonly("best_val_accuracy", &TrainResult::best_val_accuracy)
      .def_readonly("test_accuracy", &TrainResult::test_accuracy)
      .def_readonly("warnings", &TrainResult::warnings)
      .def_property_readonly("weights", [](const TrainResult& r) { return r.model.weights; })
      .def_property_readonly("skip_flags", [](const TrainResult& r) { return r.model.skip_flags; })
      .def_property_readonly("history", [](const TrainResult& r) {
        py::list out;
        for (const auto& rec : r.history) out.append(record_dict(rec));
        return out;
      })
      .def("write_metrics", &write_metrics_jsonl, py::arg("path"));

  m.def("train", &train, py::arg("graph"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_seeds", &run_seeds, py::arg("graph"), py::arg("config"), py::arg("seeds"),
        py::arg("jobs") = 1, py::call_guard<py::gil_scoped_release>());

  m.def("load_bundle", &load_bundle, py::arg("path"));
  m.def(
      "save_bundle",
      [](const GraphBundle& g, const std::filesystem::path& dir, const std::string& name,
         bool directed_source) { save_bundle(g, dir, name, directed_source); },
      py::arg("graph"), py::arg("path"), py::arg("name"), py::arg("directed_source") = false);
  m.def("open_dataset", &open_dataset, py::arg("ref"),
        "Bundle directory or synth:<kind>:<nodes>[,key=value...].");
  m.def("sha256_hex", [](const py::bytes& b) { return sha256_hex(std::string(b)); });
}
