"""Offline evaluation harness and fixtures."""
