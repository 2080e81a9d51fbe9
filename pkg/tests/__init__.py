"""Test suite for the phonon-counting toolkit."""
