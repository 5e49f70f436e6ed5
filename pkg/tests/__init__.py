"""DML Captioning Tests Package"""
