// Dataset CSV and mixture JSON formats.
#ifndef DPMIX_IO_HPP
#define DPMIX_IO_HPP

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "dpmix/model.hpp"

namespace dpmix {

// Header x0..x{d-1}[,label]; one row per point.
void write_csv(std::ostream& out, const Dataset& ds);
Dataset read_csv(std::istream& in);
void save_csv(const std::string& path, const Dataset& ds);
Dataset load_csv(const std::string& path);

// {d, k, components: [{mean, covariance | sigma2, weight}]}.
nlohmann::json mixture_to_json(const Mixture& m);
Mixture mixture_from_json(const nlohmann::json& j);

nlohmann::json load_json(const std::string& path);
void save_text(const std::string& path, const std::string& text);

}  // namespace dpmix

#endif  // DPMIX_IO_HPP
