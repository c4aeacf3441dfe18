#pragma once

#include "got/transport.hpp"
#include "gotcha/controller.hpp"

namespace gotcha {

/// Debug channel for nodes living in the controller's process.
class ControllerChannel : public got::DebugChannel {
 public:
  explicit ControllerChannel(Controller& controller) : controller_(controller) {}

  void register_node(const got::NodeRegistration& reg) override { controller_.register_node(reg); }
  got::GateDecision submit(const got::DebugEnvelope& env) override { return controller_.submit(env); }

 private:
  Controller& controller_;
};

}  // namespace gotcha
