#pragma once

// Read-only HTTP service for the explorer: GET /api/plot returns the plot
// document, everything else is served from the UI bundle directory.

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "fairsearch/csv.hpp"
#include "fairsearch/error.hpp"
#include "httplib.h"

namespace fairsearch {

class PlotServer {
 public:
  PlotServer(const std::string& plot_path, const std::string& ui_dir) : plot_(csv::read_file(plot_path)) {
    if (!std::filesystem::is_directory(ui_dir)) throw IoError("UI bundle directory not found: " + ui_dir);
    server_.Get("/api/plot", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(plot_, "application/json");
    });
    if (!server_.set_mount_point("/", ui_dir)) throw IoError("cannot serve UI bundle from " + ui_dir);
    // httplib's default sets SO_REUSEPORT, which lets a second server share
    // a busy port; plain SO_REUSEADDR makes a port conflict fail to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    // Only GET/HEAD routes exist; httplib answers other verbs with 404/405.
  }

  PlotServer(const PlotServer&) = delete;
  PlotServer& operator=(const PlotServer&) = delete;

  ~PlotServer() { stop(); }

  /// Binds to `port` on `host` (port 0 picks a free one) and returns the bound port.
  int bind(int port, const std::string& host = "127.0.0.1") {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ < 0) throw IoError("cannot bind to any port on " + host);
    } else {
      if (!server_.bind_to_port(host, port)) throw IoError("port " + std::to_string(port) + " is unavailable");
      port_ = port;
    }
    return port_;
  }

  /// Blocks serving requests until stop().
  void run() {
    if (port_ < 0) throw IoError("server is not bound");
    server_.listen_after_bind();
  }

  /// Serves on a background thread.
  void start() {
    if (port_ < 0) throw IoError("server is not bound");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  const std::string& plot() const { return plot_; }

 private:
  std::string plot_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace fairsearch
