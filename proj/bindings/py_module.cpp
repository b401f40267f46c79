#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ttswing/arm_model.hpp"
#include "ttswing/ball_dynamics.hpp"
#include "ttswing/ball_prediction.hpp"

namespace py = pybind11;
using namespace ttswing;

PYBIND11_MODULE(_core, m) {
  m.doc() = "table-tennis swing stack: ball flight, prediction, arm model, "
            "swing optimization, MPC, and closed-loop simulation";

  // ---- ball dynamics -----------------------------------------------------
  py::class_<ball::BallState>(m, "BallState")
      .def(py::init<>())
      .def_readwrite("t", &ball::BallState::t)
      .def_readwrite("p", &ball::BallState::p)
      .def_readwrite("v", &ball::BallState::v);

  py::class_<ball::AeroParams>(m, "AeroParams")
      .def(py::init<>())
      .def_readwrite("drag", &ball::AeroParams::drag)
      .def_readwrite("c_h", &ball::AeroParams::c_h)
      .def_readwrite("c_v", &ball::AeroParams::c_v)
      .def_readwrite("gravity", &ball::AeroParams::gravity)
      .def("validate", &ball::AeroParams::validate);

  py::class_<ball::TableGeometry>(m, "TableGeometry")
      .def(py::init<>())
      .def_readwrite("z_table", &ball::TableGeometry::z_table)
      .def_readwrite("x_strike", &ball::TableGeometry::x_strike)
      .def_readwrite("table_x0", &ball::TableGeometry::table_x0)
      .def_readwrite("extents", &ball::TableGeometry::extents)
      .def("on_table", &ball::TableGeometry::on_table);

  py::class_<ball::IntegrateOptions>(m, "IntegrateOptions")
      .def(py::init<>())
      .def_readwrite("dt", &ball::IntegrateOptions::dt)
      .def_readwrite("horizon", &ball::IntegrateOptions::horizon)
      .def_readwrite("stop_at_crossing", &ball::IntegrateOptions::stop_at_crossing);

  py::class_<ball::FlightEvent>(m, "FlightEvent")
      .def_readonly("t", &ball::FlightEvent::t)
      .def_readonly("p", &ball::FlightEvent::p)
      .def_readonly("v_pre", &ball::FlightEvent::v_pre)
      .def_readonly("v_post", &ball::FlightEvent::v_post)
      .def_property_readonly("type", [](const ball::FlightEvent& e) {
        switch (e.type) {
          case ball::EventType::Bounce: return "bounce";
          case ball::EventType::Crossing: return "crossing";
          case ball::EventType::OutOfBounds: return "out_of_bounds";
        }
        return "";
      });

  py::class_<ball::FlightResult>(m, "FlightResult")
      .def_readonly("events", &ball::FlightResult::events)
      .def_readonly("crossed", &ball::FlightResult::crossed)
      .def_readonly("out_of_bounds", &ball::FlightResult::out_of_bounds)
      .def_readonly("no_crossing", &ball::FlightResult::no_crossing)
      .def_readonly("crossing", &ball::FlightResult::crossing)
      .def_property_readonly("states", [](const ball::FlightResult& r) {
        std::vector<ball::BallState> out;
        for (const auto& s : r.samples)
          if (s.tag == ball::SampleTag::None) out.push_back(s.state);
        return out;
      });

  m.def("flight_accel", &ball::flight_accel, py::arg("v"), py::arg("params"));
  m.def("bounce_map", &ball::bounce_map, py::arg("v_pre"), py::arg("params"));
  m.def("integrate", &ball::integrate, py::arg("s0"), py::arg("params"),
        py::arg("geom"), py::arg("opt") = ball::IntegrateOptions{});

  // ---- prediction ----------------------------------------------------------
  py::class_<pred::StrikePrediction>(m, "StrikePrediction")
      .def_readonly("valid", &pred::StrikePrediction::valid)
      .def_readonly("t_pred", &pred::StrikePrediction::t_pred)
      .def_readonly("p_des", &pred::StrikePrediction::p_des)
      .def_readonly("t_strike", &pred::StrikePrediction::t_strike)
      .def_readonly("v_at_plane", &pred::StrikePrediction::v_at_plane);

  m.def(
      "estimate_state",
      [](const std::vector<double>& t, const std::vector<Vec3>& p) {
        if (t.size() != p.size())
          throw std::invalid_argument("estimate_state: t and p lengths differ");
        std::vector<pred::Observation> w;
        for (size_t i = 0; i < t.size(); ++i) w.push_back({t[i], p[i]});
        const auto est = pred::estimate_state(w);
        if (est.status != pred::EstimateStatus::Ok)
          throw std::invalid_argument("estimate_state: bad window");
        return est.state;
      },
      py::arg("t"), py::arg("p"));
  m.def("predict_strike", &pred::predict_strike, py::arg("state"), py::arg("params"),
        py::arg("geom"), py::arg("opt") = ball::IntegrateOptions{});

  // ---- arm model -----------------------------------------------------------
  py::class_<arm::ArmParams>(m, "ArmParams")
      .def(py::init(&arm::ArmParams::default_model))
      .def_static("default_model", &arm::ArmParams::default_model)
      .def("validate", &arm::ArmParams::validate)
      .def("q_lower", &arm::ArmParams::q_lower)
      .def("q_upper", &arm::ArmParams::q_upper)
      .def("total_mass", &arm::ArmParams::total_mass)
      .def("reach", &arm::ArmParams::reach);

  m.def("fk_paddle", &arm::fk_paddle, py::arg("params"), py::arg("q"));
  m.def("paddle_normal", &arm::paddle_normal, py::arg("params"), py::arg("q"));
  m.def("jacobian", &arm::jacobian, py::arg("params"), py::arg("q"));
  m.def(
      "dynamics_terms",
      [](const arm::ArmParams& p, const Vec5& q, const Vec5& qd, const Vec3& g) {
        const auto d = arm::dynamics_terms(p, q, qd, g);
        return py::make_tuple(d.M, d.C, d.tau_g);
      },
      py::arg("params"), py::arg("q"), py::arg("qd"),
      py::arg("gravity") = Vec3(0, 0, -9.81));
}
