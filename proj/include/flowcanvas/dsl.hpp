#pragma once

#include <stdexcept>
#include <string>

#include "flowcanvas/graph.hpp"

namespace flowcanvas {

/// Renders the linear DSL form of a graph.
///
///   sequential   A -> B -> C
///   parallel     [A, B, C]
///   conditional  Test ? Programmer : done     (or  Test ? Programmer : Revise)
///   loop         loop{A -> B, 3}
///   empty graph  (empty)
///
/// The rendered text is a wire format: it appears verbatim in feedback
/// messages and persisted trajectories.
std::string render_dsl(const WorkflowGraph& graph);

class DslSyntaxError : public std::runtime_error {
  public:
    DslSyntaxError(std::size_t position, const std::string& what)
        : std::runtime_error("DSL syntax error at " + std::to_string(position) + ": " + what),
          position_(position) {}
    std::size_t position() const { return position_; }

  private:
    std::size_t position_;
};

/// Inverse of render_dsl over its output grammar. Node ids are assigned
/// canonically in stage order; prompts and params are not part of the DSL,
/// so render_dsl(parse_dsl(t)) == t and parse_dsl(render_dsl(g)) matches g
/// up to prompts/params.
WorkflowGraph parse_dsl(const std::string& text);

/// Stage-shape and operator-kind equality, ignoring prompts and params.
bool same_structure(const WorkflowGraph& a, const WorkflowGraph& b);

}  // namespace flowcanvas
