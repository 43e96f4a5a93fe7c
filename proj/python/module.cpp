#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "srsim/channel.hpp"
#include "srsim/config.hpp"
#include "srsim/gammainc.hpp"
#include "srsim/mc.hpp"
#include "srsim/rng.hpp"
#include "srsim/ser.hpp"
#include "srsim/signal.hpp"

namespace py = pybind11;
using namespace srsim;

namespace {

ScenarioConfig config_from_json_text(const std::string& text) {
  return config_from_json(nlohmann::json::parse(text));
}

std::string config_to_json_text(const ScenarioConfig& cfg) {
  return config_to_json(cfg).dump(2);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "reflector-assisted symbiotic link: signal model, detector "
            "analytics, Monte Carlo oracle and optimizer";

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("n_pu", &ScenarioConfig::n_pu)
      .def_readwrite("n_ice", &ScenarioConfig::n_ice)
      .def_readwrite("n_tx", &ScenarioConfig::n_tx)
      .def_readwrite("n_irs", &ScenarioConfig::n_irs)
      .def_readwrite("frame_len", &ScenarioConfig::frame_len)
      .def_readwrite("pos_ap", &ScenarioConfig::pos_ap)
      .def_readwrite("pos_irs", &ScenarioConfig::pos_irs)
      .def_readwrite("pos_su", &ScenarioConfig::pos_su)
      .def_readwrite("pos_pu", &ScenarioConfig::pos_pu)
      .def_readwrite("carrier_hz", &ScenarioConfig::carrier_hz)
      .def_readwrite("ref_gain_db", &ScenarioConfig::ref_gain_db)
      .def_readwrite("spacing_wavelengths", &ScenarioConfig::spacing_wavelengths)
      .def_readwrite("alpha_ap_irs", &ScenarioConfig::alpha_ap_irs)
      .def_readwrite("alpha_irs_su", &ScenarioConfig::alpha_irs_su)
      .def_readwrite("alpha_irs_pu", &ScenarioConfig::alpha_irs_pu)
      .def_readwrite("rician_ap_irs", &ScenarioConfig::rician_ap_irs)
      .def_readwrite("rician_irs_su", &ScenarioConfig::rician_irs_su)
      .def_readwrite("rician_irs_pu", &ScenarioConfig::rician_irs_pu)
      .def_readwrite("p_max_w", &ScenarioConfig::p_max_w)
      .def_readwrite("noise_pu_w", &ScenarioConfig::noise_pu_w)
      .def_readwrite("noise_su_w", &ScenarioConfig::noise_su_w)
      .def_readwrite("p_e_max", &ScenarioConfig::p_e_max)
      .def_readwrite("rng_seed", &ScenarioConfig::rng_seed)
      .def_readwrite("mc_frames", &ScenarioConfig::mc_frames)
      .def_readwrite("ice_indices", &ScenarioConfig::ice_indices)
      .def("n_levels", &ScenarioConfig::n_levels)
      .def("resolved_ice_indices", &ScenarioConfig::resolved_ice_indices);

  m.def("default_config", &default_config);
  m.def("validate_config", &validate);
  m.def("config_from_json", &config_from_json_text);
  m.def("config_to_json", &config_to_json_text);
  m.def("dbm_to_watt", &dbm_to_watt);
  m.def("watt_to_dbm", &watt_to_dbm);

  py::class_<ChannelRealization>(m, "ChannelRealization")
      .def_readonly("g_ap_irs", &ChannelRealization::g_ap_irs)
      .def_readonly("h_irs_pu", &ChannelRealization::h_irs_pu)
      .def_readonly("h_irs_su", &ChannelRealization::h_irs_su)
      .def_readonly("realization", &ChannelRealization::realization);

  m.def("synthesize_channels", &synthesize_channels, py::arg("config"),
        py::arg("realization"));
  m.def("ula_steering", &ula_steering);

  py::class_<ActivationCodebook>(m, "ActivationCodebook")
      .def(py::init<int, std::vector<int>>())
      .def("n_levels", &ActivationCodebook::n_levels)
      .def("bits_per_symbol", &ActivationCodebook::bits_per_symbol)
      .def("mask", &ActivationCodebook::mask);

  m.def("codebook_for", &codebook_for);
  m.def("su_level_powers", &su_level_powers);
  m.def("su_gains", &su_gains);
  m.def("pu_gains", &pu_gains);
  m.def("pu_rate_avg", &pu_rate_avg);
  m.def("sum_rate", &sum_rate);

  m.def("ser_upper_bound", &ser_upper_bound, py::arg("levels"),
        py::arg("sigma2"), py::arg("frame_len"));
  m.def("map_ser_exact", &map_ser_exact);
  m.def("map_boundaries", &map_boundaries);

  m.def("reg_lower_gamma", &reg_lower_gamma);
  m.def("reg_upper_gamma", &reg_upper_gamma);
  m.def("upper_gamma_quantile", &upper_gamma_quantile);

  py::class_<SerEstimate>(m, "SerEstimate")
      .def_readonly("ser", &SerEstimate::ser)
      .def_readonly("std_err", &SerEstimate::std_err)
      .def_readonly("wilson_lo", &SerEstimate::wilson_lo)
      .def_readonly("wilson_hi", &SerEstimate::wilson_hi)
      .def_readonly("frames", &SerEstimate::frames)
      .def_readonly("errors", &SerEstimate::errors);

  m.def(
      "estimate_ser",
      [](std::uint64_t seed, const Eigen::MatrixXcd& gains, double sigma2,
         int frame_len, long n_frames) {
        RngStream rng(seed);
        return estimate_ser(rng, gains, sigma2, frame_len, n_frames);
      },
      py::arg("seed"), py::arg("gains"), py::arg("sigma2"),
      py::arg("frame_len"), py::arg("n_frames"));
  m.def("gains_from_levels", &gains_from_levels);

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
