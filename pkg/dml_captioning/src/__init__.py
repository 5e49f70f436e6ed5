"""Discrete Mode Learning core package"""
