#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rana/allocation.hpp"
#include "rana/evaluation.hpp"
#include "rana/kernels.hpp"

namespace py = pybind11;
using namespace rana;

namespace {

DenseMatrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
  std::vector<double> data(a.data(), a.data() + a.size());
  return DenseMatrix::make(static_cast<std::size_t>(a.shape(0)),
                           static_cast<std::size_t>(a.shape(1)),
                           std::move(data));
}

py::array_t<double> from_matrix(const DenseMatrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

DenseVector to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-d array");
  return DenseVector(a.data(), a.data() + a.size());
}

py::array_t<double> from_vector(const DenseVector& v) {
  py::array_t<double> out(std::vector<py::ssize_t>{
      static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Mask to_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  Mask m(static_cast<std::size_t>(a.size()));
  for (py::ssize_t i = 0; i < a.size(); ++i) m[i] = a.data()[i] ? 1 : 0;
  return m;
}

}  // namespace

PYBIND11_MODULE(_rana, m) {
  m.doc() = "rank-adaptive layer compression core";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ValueError);

  m.def("matmul", [](py::array_t<double> a, py::array_t<double> b) {
    return from_matrix(matmul(to_matrix(a), to_matrix(b)));
  });

  m.def("thin_svd", [](py::array_t<double> a) {
    SvdResult r = thin_svd(to_matrix(a));
    return py::make_tuple(from_matrix(r.U), from_vector(r.S), from_matrix(r.Vt));
  });

  m.def("quantile", [](py::array_t<double> v, double q) {
    return quantile(to_vector(v), q);
  });

  m.def(
      "decompose",
      [](py::array_t<double> w, py::array_t<double> x, std::size_t keep_ranks) {
        RankDecomposition d =
            decompose(to_matrix(w), CalibrationSet{to_matrix(x)}, keep_ranks);
        return py::make_tuple(from_matrix(d.A), from_matrix(d.B),
                              from_vector(d.singular_values));
      },
      py::arg("weights"), py::arg("calib"), py::arg("keep_ranks") = 0);

  m.def("rank_contributions", [](py::array_t<double> b, py::array_t<double> x) {
    DenseMatrix B = to_matrix(b);
    RankDecomposition dec{DenseMatrix::identity(B.rows()), B,
                          DenseVector(B.rows(), 0.0), B.rows(), B.cols(), 0.0};
    return from_matrix(
        rank_contributions(dec, CalibrationSet{to_matrix(x)}).contributions);
  });

  m.def("calibrate_b_masker_threshold",
        [](py::array_t<double> contributions, double target) {
          DenseMatrix c = to_matrix(contributions);
          ContributionStats stats{c, DenseVector(c.rows(), 0.0)};
          BMasker masker = calibrate_b_masker(stats, target);
          return py::make_tuple(masker.threshold, masker.calibrated_mean_active);
        });

  m.def("oracle_topk", [](py::array_t<double> bx, std::size_t k) {
    Mask mask = oracle_topk(to_vector(bx), k);
    py::array_t<bool> out(std::vector<py::ssize_t>{
        static_cast<py::ssize_t>(mask.size())});
    for (std::size_t i = 0; i < mask.size(); ++i)
      out.mutable_data()[i] = mask[i] != 0;
    return out;
  });

  m.def("masked_gemv",
        [](py::array_t<double> mat, py::array_t<bool> mask, py::array_t<double> v) {
          return from_vector(masked_gemv(to_matrix(mat), to_mask(mask), to_vector(v)));
        });

  m.def(
      "forward_rank_adapted",
      [](py::array_t<double> a, py::array_t<double> b, double threshold,
         py::array_t<double> x) {
        DenseMatrix A = to_matrix(a), B = to_matrix(b);
        RankDecomposition dec{A, B, DenseVector(B.rows(), 0.0), A.rows(),
                              B.cols(), 0.0};
        BMasker masker{threshold, 0.0, 0.0, B.rows()};
        RankAdaptedLinear layer{std::move(dec), masker, std::nullopt};
        return from_vector(forward_rank_adapted(layer, to_vector(x)));
      },
      py::arg("A"), py::arg("B"), py::arg("threshold"), py::arg("x"));

  m.def(
      "line_search_layer",
      [](py::array_t<double> w, py::array_t<double> x, double budget) {
        DenseMatrix W = to_matrix(w);
        CalibrationSet calib{to_matrix(x)};
        RankDecomposition dec = decompose(W, calib);
        ContributionStats stats = rank_contributions(dec, calib);
        LayerAllocation alloc = line_search_layer(W, dec, stats, calib, budget);
        return py::dict(
            py::arg("kept_ranks") = alloc.kept_ranks,
            py::arg("expected_active") = alloc.target_expected_active,
            py::arg("threshold") = alloc.threshold,
            py::arg("flops") = alloc.achieved_flops.total,
            py::arg("calib_error") = alloc.calib_error);
      },
      py::arg("weights"), py::arg("calib"), py::arg("budget"));

  m.def("dense_linear_flops", [](std::size_t o, std::size_t i) {
    return dense_linear_flops(o, i).total;
  });

  m.def(
      "rank_adapted_flops",
      [](std::size_t D, std::size_t o, std::size_t i, double e,
         const std::string& kind, std::size_t inner) {
        MaskerKind mk = kind == "sigmoid" ? MaskerKind::Sigmoid
                        : kind == "none"  ? MaskerKind::None
                                          : MaskerKind::BMasker;
        return rank_adapted_flops(D, o, i, e, mk, inner).total;
      },
      py::arg("ranks"), py::arg("out_dim"), py::arg("in_dim"),
      py::arg("expected_active"), py::arg("masker") = "b",
      py::arg("sigmoid_inner") = 0);
}
